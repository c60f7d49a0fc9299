#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include <json.hpp>

#include "detectlab/checkpoint.hpp"
#include "detectlab/errors.hpp"
#include "detectlab/experiment.hpp"
#include "detectlab/synthetic.hpp"
#include "util.hpp"

using namespace detectlab;
namespace fs = std::filesystem;

namespace {

SyntheticConfig small_synth() {
  SyntheticConfig s;
  s.train_per_source = 24;
  s.test_per_source = 10;
  s.unseen_per_source = 20;
  return s;
}

std::string fast_config(const fs::path& dir) {
  return "train = " + (dir / "train.jsonl").string() + "\n" +
         "eval.in-domain = " + (dir / "test_in.jsonl").string() + "\n" +
         "eval.ood = " + (dir / "test_ood.jsonl").string() + "\n" +
         "unseen = " + (dir / "unseen.jsonl").string() +
         "\n"
         "detectors = supervised, scl\n"
         "hidden_dim = 8\nff_dim = 8\nlayers = 1\nprojection_dim = 4\nmax_len = 48\n"
         "learning_rate = 0.003\nepochs = 1\nadapt.k = 5\n";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(DETECTLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("config parsing, comments, relative paths and overrides") {
    const auto cfg = parse_config(
        "# comment\n"
        "train = data/train.jsonl   # trailing comment\n"
        "eval.a = a.jsonl\n"
        "eval.b = /abs/b.jsonl\n"
        "detectors = supervised,gan , binoculars\n"
        "seed = 7\n"
        "positional = false\n"
        "attack.victim = supervised\n",
        "/base");
    CHECK(cfg.train_path == fs::path("/base/data/train.jsonl"));
    REQUIRE(cfg.eval_sets.size() == 2);
    CHECK(cfg.eval_sets[0].first == "a");
    CHECK(cfg.eval_sets[0].second == fs::path("/base/a.jsonl"));
    CHECK(cfg.eval_sets[1].second == fs::path("/abs/b.jsonl"));
    CHECK(cfg.detectors == std::vector<std::string>{"supervised", "gan", "binoculars"});
    CHECK(cfg.seed == 7);
    CHECK(!cfg.encoder.positional);
    CHECK(cfg.attack_victim == "supervised");

    auto c2 = cfg;
    apply_override(c2, "epochs=9");
    CHECK(c2.train.epochs == 9);
    CHECK_THROWS_AS(apply_override(c2, "epochs"), ConfigError);
    CHECK_THROWS_AS(apply_override(c2, "bogus=1"), ConfigError);
    CHECK_THROWS_AS(parse_config("epochs = many\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("positional = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("no equals sign\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("learningrate = 1\n"), ConfigError);
  }

  TEST_CASE("canonical listing re-parses to the same config") {
    auto cfg = parse_config("train = /t.jsonl\neval.x = /x.jsonl\nseed = 3\nattack.typo_rate = 0.125\n");
    const auto again = parse_config(cfg.canonical());
    CHECK(again.canonical() == cfg.canonical());
    cfg.output_dir = "elsewhere";
    cfg.jobs = 8;
    CHECK(parse_config(cfg.canonical()).canonical() == again.canonical());
  }

  TEST_CASE("seeds are salted per component") {
    ExperimentConfig cfg;
    cfg.seed = 4;
    CHECK(train_config(cfg, 1).seed != train_config(cfg, 2).seed);
    cfg.seed = 5;
    CHECK(train_config(cfg, 1).seed != train_config(ExperimentConfig{}, 1).seed);
  }

  TEST_CASE("validation happens before any training") {
    testutil::TempDir dir("cfg");
    write_synthetic(make_synthetic(small_synth()), dir.path);
    auto cfg = parse_config(fast_config(dir.path));
    CHECK_NOTHROW(cfg.validate());
    auto missing = cfg;
    missing.eval_sets.emplace_back("gone", dir.path / "nope.jsonl");
    CHECK_THROWS_AS(run_experiment(missing), ConfigError);
    auto bad = cfg;
    bad.detectors = {"supervised", "oracle"};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.attack_victim = "gan";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.eval_sets.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.train.learning_rate = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("one detector and one dataset give one row; empty attacks serialize as []") {
    testutil::TempDir dir("one");
    write_synthetic(make_synthetic(small_synth()), dir.path);
    auto cfg = parse_config(fast_config(dir.path));
    cfg.detectors = {"supervised"};
    cfg.eval_sets.resize(1);
    cfg.unseen_path.reset();
    const auto b = run_experiment(cfg);
    REQUIRE(b.metrics.size() == 1);
    CHECK(b.metrics[0].dataset == "in-domain");
    CHECK(b.metrics[0].method == "Supervised (BCE)");
    CHECK(b.predictions.size() == 1);
    CHECK(b.metrics[0].counts == counts_of(b.predictions[0].predictions));
    CHECK(b.adaptation.empty());
    emit_reports(b, dir.path / "out");
    CHECK(slurp(dir.path / "out" / "attacks.json") == "[]\n");
    CHECK(parse_metrics_json(slurp(dir.path / "out" / "metrics.json")) == b.metrics);
    const auto pred_file = dir.path / "out" / "predictions" / b.predictions[0].file_name();
    CHECK(fs::is_regular_file(pred_file));
    const auto meta = nlohmann::json::parse(slurp(dir.path / "out" / "metadata.json"));
    CHECK(meta["config_hash"] == b.config_hash);
    CHECK(meta["prediction_files"][0]["file"] == "predictions/" + b.predictions[0].file_name());
    // every table cell is traceable to the stored predictions
    std::vector<RawPrediction> reread;
    std::ifstream in(pred_file);
    for (std::string line; std::getline(in, line);) {
      const auto j = nlohmann::json::parse(line);
      reread.push_back({j["record_id"], std::stod(j["score"].get<std::string>()),
                        parse_label(j["verdict"].get<std::string>()), parse_label(j["label"].get<std::string>())});
    }
    CHECK(counts_of(reread) == b.metrics[0].counts);
  }

  TEST_CASE("runs are deterministic and cover every detector") {
    testutil::TempDir dir("det");
    write_synthetic(make_synthetic(small_synth()), dir.path);
    auto cfg = parse_config(fast_config(dir.path) +
                            "detectors = supervised, scl, gan, perplexity, binoculars, fastdetect\n"
                            "attack.victim = supervised\nattack.steps = 3\nattack.suffix_len = 2\n"
                            "attack.max_samples = 3\nattack.batch_eval = 8\n");
    cfg.jobs = 3;
    const auto a = run_experiment(cfg);
    cfg.jobs = 1;
    const auto b = run_experiment(cfg);
    CHECK(a.metrics.size() == 12);
    CHECK(metrics_csv(a.metrics) == metrics_csv(b.metrics));
    CHECK(attacks_json(a.attacks) == attacks_json(b.attacks));
    CHECK(a.attacks.size() == 4);
    CHECK(a.adaptation.size() == 1);
    CHECK(a.adaptation[0].k == 5);
    CHECK(adaptation_json(a.adaptation) == adaptation_json(b.adaptation));
    const auto plot = adaptation_plot_csv(a.adaptation);
    CHECK(plot.rfind("generator,setting,k,accuracy,f1\n", 0) == 0);
    CHECK(std::count(plot.begin(), plot.end(), '\n') == 3);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("exit codes") {
    testutil::TempDir dir("cli");
    const auto d = dir.path.string();
    CHECK(run_cli("--definitely-not-a-flag") == 2);
    CHECK(run_cli("make-synthetic --out " + d + "/data --train-per-source 16 --test-per-source 6 --unseen-per-source 12") == 0);
    CHECK(fs::is_regular_file(dir.path / "data" / "train.jsonl"));
    CHECK(run_cli("train-supervised --train " + d + "/missing.jsonl --out " + d + "/m.json") == 2);
    {
      std::ofstream bad(dir.path / "bad.jsonl");
      bad << "{\"text\":\"x\",\"label\":\"ai\"}\n{oops\n";
    }
    CHECK(run_cli("train-supervised --train " + d + "/bad.jsonl --out " + d + "/m.json") == 3);
    CHECK(run_cli("score --detector nonsense --train " + d + "/data/train.jsonl --input " + d + "/data/test_in.jsonl") == 2);
    {
      std::ofstream cfg(dir.path / "unknown.cfg");
      cfg << "colour = blue\n";
    }
    CHECK(run_cli("run --config " + d + "/unknown.cfg") == 2);
    {
      std::ofstream ckpt(dir.path / "garbage.json");
      ckpt << "{\"format\":\"detectlab-checkpoint\",\"version\":99}";
    }
    CHECK(run_cli("classify --checkpoint " + d + "/garbage.json --input " + d + "/data/test_in.jsonl") == 3);
  }

  TEST_CASE("train, classify, adapt, attack, score, run and report") {
    testutil::TempDir dir("flow");
    const auto d = dir.path.string();
    REQUIRE(run_cli("make-synthetic --out " + d + "/data --train-per-source 16 --test-per-source 6 --unseen-per-source 12") == 0);
    const std::string fast = " --set hidden_dim=8 --set ff_dim=8 --set layers=1 --set projection_dim=4 --set max_len=48"
                             " --set learning_rate=0.003 --set epochs=1";
    CHECK(run_cli("train-supervised --train " + d + "/data/train.jsonl --out " + d + "/sup.json" + fast) == 0);
    CHECK(run_cli("train-scl --train " + d + "/data/train.jsonl --out " + d + "/scl.json" + fast) == 0);
    CHECK(fs::is_regular_file(dir.path / "scl.json.centroids.json"));
    CHECK(run_cli("train-gan --train " + d + "/data/train.jsonl --out " + d + "/gan.json" + fast) == 0);
    CHECK(run_cli("classify --checkpoint " + d + "/sup.json --input " + d + "/data/test_in.jsonl --out " + d +
                  "/pred.jsonl") == 0);
    CHECK(fs::is_regular_file(dir.path / "pred.jsonl"));
    CHECK(run_cli("classify --checkpoint " + d + "/scl.json --input " + d + "/data/test_in.jsonl") == 2);
    CHECK(run_cli("classify --checkpoint " + d + "/scl.json --centroids " + d + "/scl.json.centroids.json --input " +
                  d + "/data/test_in.jsonl --jobs 2") == 0);
    CHECK(run_cli("adapt --checkpoint " + d + "/scl.json --centroids " + d + "/scl.json.centroids.json --input " + d +
                  "/data/unseen.jsonl --k 5 --out " + d + "/adapted.json") == 0);
    const auto adapted = centroids_from_json(read_file(dir.path / "adapted.json"));
    const auto base = centroids_from_json(read_file(dir.path / "scl.json.centroids.json"));
    CHECK(adapted.human == base.human);
    CHECK(run_cli("adapt --checkpoint " + d + "/scl.json --centroids " + d + "/scl.json.centroids.json --input " + d +
                  "/data/unseen.jsonl --k 500 --out " + d + "/adapted.json") == 3);
    CHECK(run_cli("attack --victim " + d + "/gan.json --input " + d +
                  "/data/test_in.jsonl --suite --steps 2 --suffix-len 1 --max-samples 2",
                  "DETECTLAB_OUT=" + d + "/attack") == 0);
    CHECK(fs::is_regular_file(dir.path / "attack" / "attacks.json"));
    CHECK(run_cli("score --detector fastdetect --train " + d + "/data/train.jsonl --input " + d +
                  "/data/test_in.jsonl --out " + d + "/ppl.jsonl") == 0);
    CHECK(run_cli("score --detector binoculars --train " + d + "/data/train.jsonl --input " + d +
                  "/data/test_in.jsonl --out " + d + "/bino.jsonl") == 0);
    {
      std::ofstream cfg(dir.path / "exp.cfg");
      cfg << fast_config(dir.path / "data") << "detectors = supervised\n";
    }
    CHECK(run_cli("run --config " + d + "/exp.cfg --out " + d + "/run1", "DETECTLAB_JOBS=2") == 0);
    CHECK(run_cli("run --config " + d + "/exp.cfg", "DETECTLAB_OUT=" + d + "/run2") == 0);
    CHECK(slurp(dir.path / "run1" / "metrics.csv") == slurp(dir.path / "run2" / "metrics.csv"));
    CHECK(run_cli("report --dir " + d + "/run1") == 0);
    CHECK(run_cli("report --dir " + d + "/nowhere") == 2);
  }
}
