#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "detectlab/adversarial.hpp"
#include "detectlab/checkpoint.hpp"
#include "detectlab/errors.hpp"
#include "detectlab/evalkit.hpp"
#include "detectlab/experiment.hpp"
#include "detectlab/parallel.hpp"
#include "detectlab/synthetic.hpp"

namespace fs = std::filesystem;
using namespace detectlab;

namespace {

// Output directory: --out flag, then DETECTLAB_OUT, then the fallback.
fs::path output_dir(const std::string& flag, const fs::path& fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DETECTLAB_OUT"); env && *env) return env;
  return fallback;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path);
}

struct ConfigFlags {
  std::string config;
  std::vector<std::string> overrides;

  void add(CLI::App* app) {
    app->add_option("--config", config, "key = value experiment config");
    app->add_option("--set", overrides, "override a config key (key=value), repeatable");
  }
  ExperimentConfig load() const {
    ExperimentConfig cfg;
    if (!config.empty()) cfg = load_config(config);
    // --set beats DETECTLAB_JOBS, which beats the config file
    if (const char* env = std::getenv("DETECTLAB_JOBS"); env && *env) cfg.jobs = default_jobs();
    for (const auto& o : overrides) apply_override(cfg, o);
    return cfg;
  }
};

void print_predictions_summary(const std::vector<RawPrediction>& preds, const std::string& dataset,
                               const std::string& method) {
  const std::vector<MetricsRow> rows = {{dataset, method, counts_of(preds)}};
  std::cout << metrics_table(rows);
}

CentroidPair load_centroids(const std::string& path) {
  require_file(path, "--centroids");
  return centroids_from_json(read_file(path));
}

// Victim plus the model objects it borrows.
struct LoadedVictim {
  std::optional<SupervisedDetector> supervised;
  std::optional<StyleModel> style;
  std::optional<CentroidPair> centroids;
  std::optional<GanDetector> gan;
  std::unique_ptr<Victim> victim;
};

LoadedVictim load_victim(const std::string& checkpoint, const std::string& centroids) {
  require_file(checkpoint, "--victim");
  const auto text = read_file(checkpoint);
  LoadedVictim v;
  switch (checkpoint_kind(text)) {
    case ModelKind::Supervised:
      v.supervised = supervised_from_checkpoint(text);
      v.victim = std::make_unique<SupervisedVictim>(*v.supervised);
      break;
    case ModelKind::Scl:
      v.style = style_model_from_checkpoint(text);
      v.centroids = load_centroids(centroids);
      v.victim = std::make_unique<CentroidVictim>(*v.style, *v.centroids);
      break;
    case ModelKind::Gan:
      v.gan = gan_from_checkpoint(text);
      v.victim = std::make_unique<GanVictim>(*v.gan);
      break;
  }
  return v;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"detectlab: machine-generated text detection experiments"};
  app.require_subcommand(1);

  // make-synthetic
  auto* synth = app.add_subcommand("make-synthetic", "write the bundled synthetic corpora");
  SyntheticConfig sc;
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--seed", sc.seed);
  synth->add_option("--train-per-source", sc.train_per_source);
  synth->add_option("--test-per-source", sc.test_per_source);
  synth->add_option("--unseen-per-source", sc.unseen_per_source);
  synth->add_option("--vocab-per-source", sc.vocab_per_source);
  synth->add_option("--overlap", sc.overlap, "shared vocabulary fraction");
  synth->add_option("--min-words", sc.min_words);
  synth->add_option("--max-words", sc.max_words);

  // train-*
  struct TrainFlags {
    ConfigFlags cfg;
    std::string train;
    std::string out;
    std::string centroids;
  };
  TrainFlags tsup, tscl, tgan;
  auto add_train = [&](const char* name, const char* help, TrainFlags& f) {
    auto* s = app.add_subcommand(name, help);
    f.cfg.add(s);
    s->add_option("--train", f.train, "training JSONL (overrides the config)");
    s->add_option("--out", f.out, "checkpoint path")->required();
    return s;
  };
  auto* train_sup = add_train("train-supervised", "train the BCE classifier", tsup);
  auto* train_scl = add_train("train-scl", "train the contrastive style encoder and its centroids", tscl);
  train_scl->add_option("--centroids", tscl.centroids, "centroid JSON path (default: <out>.centroids.json)");
  auto* train_gan = add_train("train-gan", "train the GAN baseline", tgan);

  // score
  auto* score = app.add_subcommand("score", "training-free scoring with proxy language models");
  ConfigFlags score_cfg;
  score_cfg.add(score);
  std::string score_method = "binoculars", score_train, score_input, score_out, score_calib;
  int score_mc = -1;
  score->add_option("--detector,--method", score_method, "ppl | binoculars | fastdetect");
  score->add_option("--mc-samples", score_mc, "Monte-Carlo resamples for fastdetect (0: analytic)");
  score->add_option("--train", score_train, "JSONL used to fit the proxy LMs and the vocabulary");
  score->add_option("--calibrate", score_calib, "labeled JSONL for threshold calibration (default: --train)");
  score->add_option("--input", score_input, "JSONL to score")->required();
  score->add_option("--out", score_out, "predictions JSONL path");

  // classify
  auto* classify = app.add_subcommand("classify", "label texts with a trained checkpoint");
  std::string cls_ckpt, cls_centroids, cls_input, cls_out;
  std::size_t cls_jobs = default_jobs();
  classify->add_option("--checkpoint", cls_ckpt)->required();
  classify->add_option("--centroids", cls_centroids, "centroid JSON (SCL checkpoints)");
  classify->add_option("--input", cls_input)->required();
  classify->add_option("--out", cls_out, "predictions JSONL path");
  classify->add_option("--jobs", cls_jobs);

  // adapt
  auto* adapt = app.add_subcommand("adapt", "few-shot update of the AI centroid");
  std::string ad_ckpt, ad_centroids, ad_input, ad_out, ad_generator;
  std::size_t ad_k = 25;
  double ad_alpha = 1.0;
  std::uint64_t ad_seed = 0;
  adapt->add_option("--checkpoint", ad_ckpt)->required();
  adapt->add_option("--centroids", ad_centroids)->required();
  adapt->add_option("--input", ad_input, "JSONL holding AI samples of the target generator")->required();
  adapt->add_option("--k", ad_k);
  adapt->add_option("--alpha", ad_alpha);
  adapt->add_option("--seed", ad_seed);
  adapt->add_option("--generator", ad_generator, "target generator (default: the only AI generator)");
  adapt->add_option("--out", ad_out, "adapted centroid JSON path")->required();

  // attack
  auto* attack = app.add_subcommand("attack", "run the adversarial suite against a checkpoint");
  std::string at_victim, at_centroids, at_input, at_out;
  SuiteConfig suite;
  bool at_suite = false;
  attack->add_option("--victim", at_victim, "checkpoint path")->required();
  attack->add_option("--centroids", at_centroids, "centroid JSON (SCL victims)");
  attack->add_option("--input", at_input, "JSONL whose AI records form the cohort")->required();
  attack->add_flag("--suite", at_suite, "run all four attacks (the default)");
  attack->add_option("--suffix-len", suite.attack.suffix_len);
  attack->add_option("--steps", suite.attack.steps);
  attack->add_option("--top-k", suite.attack.top_k);
  attack->add_option("--batch-eval", suite.attack.batch_eval);
  attack->add_option("--seed", suite.attack.seed);
  attack->add_option("--typo-rate", suite.typo_rate);
  attack->add_option("--quote-style", suite.quote_style);
  attack->add_option("--max-samples", suite.max_samples);
  attack->add_option("--out", at_out, "report directory");

  // run
  auto* run = app.add_subcommand("run", "train, evaluate, adapt and attack per a config file");
  ConfigFlags run_cfg;
  run_cfg.add(run);
  std::string run_out;
  run->add_option("--out", run_out, "report directory");

  // report
  auto* report = app.add_subcommand("report", "print the tables of a finished run");
  std::string rep_dir;
  report->add_option("--dir", rep_dir, "report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorCategory::Config);
  }

  if (*synth) {
    const auto dir = output_dir(synth_out, "synthetic");
    const auto b = make_synthetic(sc);
    write_synthetic(b, dir);
    std::cout << "wrote " << b.train.size() << " train, " << b.test_in.size() << " test_in, " << b.test_ood.size()
              << " test_ood, " << b.unseen.size() << " unseen records to " << dir.string() << "\n";
    return 0;
  }

  auto train_common = [](TrainFlags& f) {
    auto cfg = f.cfg.load();
    if (!f.train.empty()) cfg.train_path = f.train;
    require_file(cfg.train_path.string(), "training set");
    cfg.train.validate();
    return std::pair{cfg, load_jsonl(cfg.train_path)};
  };
  if (*train_sup) {
    auto [cfg, train] = train_common(tsup);
    const auto d = train_supervised_detector(cfg, train);
    write_file(tsup.out, checkpoint_json(d));
    std::cout << "checkpoint " << tsup.out << " (" << checksum_hex(checksum(d.parameters())) << ")\n";
    return 0;
  }
  if (*train_scl) {
    auto [cfg, train] = train_common(tscl);
    const auto m = train_style_model(cfg, train);
    auto c = compute_centroids(m, train);
    c.source_checkpoint_hash = checksum_hex(m.checksum());
    const auto cpath = tscl.centroids.empty() ? tscl.out + ".centroids.json" : tscl.centroids;
    write_file(tscl.out, checkpoint_json(m));
    write_file(cpath, centroids_to_json(c));
    std::cout << "checkpoint " << tscl.out << " (" << c.source_checkpoint_hash << "), centroids " << cpath << "\n";
    return 0;
  }
  if (*train_gan) {
    auto [cfg, train] = train_common(tgan);
    const auto d = train_gan_detector(cfg, train);
    write_file(tgan.out, checkpoint_json(d));
    std::cout << "checkpoint " << tgan.out << "\n";
    return 0;
  }

  if (*score) {
    auto cfg = score_cfg.load();
    const auto method = parse_training_free(score_method);
    if (!method) throw ConfigError("unknown --detector '" + score_method + "'");
    if (score_mc >= 0) cfg.mc_samples = score_mc;
    if (!score_train.empty()) cfg.train_path = score_train;
    require_file(cfg.train_path.string(), "--train");
    require_file(score_input, "--input");
    if (!score_calib.empty()) require_file(score_calib, "--calibrate");
    const auto train = load_jsonl(cfg.train_path);
    const auto calib = score_calib.empty() ? train : load_jsonl(score_calib);
    const auto det = training_free_detector(*method, cfg, train, calib);
    const auto input = load_jsonl(score_input);
    const auto preds = predict_corpus(*det, input, cfg.jobs);
    if (!score_out.empty()) write_file(score_out, predictions_jsonl(preds));
    else std::cout << predictions_jsonl(preds);
    print_predictions_summary(preds, fs::path(score_input).stem().string(), det->method());
    return 0;
  }

  if (*classify) {
    require_file(cls_ckpt, "--checkpoint");
    require_file(cls_input, "--input");
    const auto text = read_file(cls_ckpt);
    std::unique_ptr<Detector> det;
    switch (checkpoint_kind(text)) {
      case ModelKind::Supervised: det = supervised_detector(supervised_from_checkpoint(text)); break;
      case ModelKind::Scl: det = scl_detector(style_model_from_checkpoint(text), load_centroids(cls_centroids)); break;
      case ModelKind::Gan: det = gan_detector(gan_from_checkpoint(text)); break;
    }
    const auto input = load_jsonl(cls_input);
    const auto preds = predict_corpus(*det, input, cls_jobs);
    if (!cls_out.empty()) write_file(cls_out, predictions_jsonl(preds));
    else std::cout << predictions_jsonl(preds);
    print_predictions_summary(preds, fs::path(cls_input).stem().string(), det->method());
    return 0;
  }

  if (*adapt) {
    require_file(ad_ckpt, "--checkpoint");
    require_file(ad_input, "--input");
    const auto model = style_model_from_checkpoint(read_file(ad_ckpt));
    const auto base = load_centroids(ad_centroids);
    if (!base.source_checkpoint_hash.empty() && base.source_checkpoint_hash != checksum_hex(model.checksum())) {
      throw ValidationError("centroids were computed with a different checkpoint");
    }
    const auto input = load_jsonl(ad_input);
    std::vector<const TextRecord*> pool;
    for (const auto& r : input) {
      if (r.label == Label::Ai && (ad_generator.empty() || r.generator == ad_generator)) pool.push_back(&r);
    }
    if (pool.size() < ad_k) {
      throw ValidationError("adaptation input has " + std::to_string(pool.size()) + " matching AI records; k = " +
                            std::to_string(ad_k));
    }
    std::mt19937_64 rng(ad_seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    AdaptationSet set;
    set.alpha = ad_alpha;
    nlohmann::ordered_json ids = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < ad_k; ++i) {
      set.texts.push_back(pool[i]->text);
      ids.push_back(pool[i]->record_id);
    }
    const auto adapted = ad_k == 0 ? base : adapt_ai_centroid(model, base, set);
    write_file(ad_out, centroids_to_json(adapted));
    std::cout << "adapted AI centroid with k=" << ad_k << " alpha=" << ad_alpha << " -> " << ad_out << "\n"
              << "adaptation ids: " << ids.dump() << "\n";
    return 0;
  }

  if (*attack) {
    (void)at_suite;
    require_file(at_input, "--input");
    auto v = load_victim(at_victim, at_centroids);
    const auto cohort = load_jsonl(at_input);
    const auto reports = run_attack_suite(*v.victim, cohort, suite);
    const auto dir = output_dir(at_out, "attack-report");
    write_file(dir / "attacks.json", attacks_json(reports));
    write_file(dir / "attacks.txt", attack_table(reports));
    write_file(dir / "attack_transcripts.jsonl", transcripts_jsonl(reports));
    std::cout << attack_table(reports);
    return 0;
  }

  if (*run) {
    auto cfg = run_cfg.load();
    const auto dir = output_dir(run_out, cfg.output_dir);
    const auto bundle = run_experiment(cfg);
    emit_reports(bundle, dir);
    std::cout << metrics_table(bundle.metrics);
    if (!bundle.attacks.empty()) std::cout << "\n" << attack_table(bundle.attacks);
    for (const auto& a : bundle.adaptation) {
      const auto z = metrics(a.zero_shot), k = metrics(a.k_shot);
      std::cout << "\nadaptation " << a.target_generator << ": zero-shot acc " << format_percent(z.accuracy) << ", "
                << a.k << "-shot acc " << format_percent(k.accuracy) << "\n";
    }
    std::cout << "reports in " << dir.string() << "\n";
    return 0;
  }

  if (*report) {
    const auto dir = output_dir(rep_dir, "detectlab-out");
    const auto metrics_path = dir / "metrics.json";
    if (!fs::is_regular_file(metrics_path)) throw ConfigError("no metrics.json in " + dir.string());
    std::cout << metrics_table(parse_metrics_json(read_file(metrics_path)));
    if (fs::is_regular_file(dir / "attacks.txt")) std::cout << "\n" << read_file(dir / "attacks.txt");
    if (fs::is_regular_file(dir / "adaptation_plot.csv")) std::cout << "\n" << read_file(dir / "adaptation_plot.csv");
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::Runtime);
  }
}
