#include "detectlab/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "detectlab/checkpoint.hpp"
#include "detectlab/errors.hpp"
#include "detectlab/external_lm.hpp"
#include "detectlab/parallel.hpp"

namespace detectlab {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// config

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": invalid number '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& v) {
  const fs::path p(v);
  return p.is_absolute() || base.empty() ? p : base / p;
}

struct Key {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&, const fs::path&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T, typename Get>
Key number_key(std::string name, Get field) {
  return {name,
          [name, field](ExperimentConfig& c, const std::string& v, const fs::path&) {
            field(c) = parse_number<T>(name, v);
          },
          [field](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return num(field(const_cast<ExperimentConfig&>(c)));
            } else {
              return std::to_string(field(const_cast<ExperimentConfig&>(c)));
            }
          }};
}

template <typename Get>
Key bool_key(std::string name, Get field) {
  return {name,
          [name, field](ExperimentConfig& c, const std::string& v, const fs::path&) { field(c) = parse_bool(name, v); },
          [field](const ExperimentConfig& c) { return std::string(field(const_cast<ExperimentConfig&>(c)) ? "true" : "false"); }};
}

template <typename Get>
Key string_key(std::string name, Get field) {
  return {name, [field](ExperimentConfig& c, const std::string& v, const fs::path&) { field(c) = v; },
          [field](const ExperimentConfig& c) { return field(const_cast<ExperimentConfig&>(c)); }};
}

const std::vector<Key>& keys() {
  using C = ExperimentConfig;
  static const std::vector<Key> k = {
      {"train", [](C& c, const std::string& v, const fs::path& b) { c.train_path = resolve(b, v); },
       [](const C& c) { return c.train_path.generic_string(); }},
      {"unseen",
       [](C& c, const std::string& v, const fs::path& b) {
         if (v.empty()) c.unseen_path.reset();
         else c.unseen_path = resolve(b, v);
       },
       [](const C& c) { return c.unseen_path ? c.unseen_path->generic_string() : std::string(); }},
      {"detectors", [](C& c, const std::string& v, const fs::path&) { c.detectors = split_list(v); },
       [](const C& c) {
         std::string s;
         for (const auto& d : c.detectors) s += (s.empty() ? "" : ",") + d;
         return s;
       }},
      number_key<std::uint64_t>("seed", [](C& c) -> auto& { return c.seed; }),
      {"output", [](C& c, const std::string& v, const fs::path&) { c.output_dir = v; },
       [](const C& c) { return c.output_dir.generic_string(); }},
      number_key<std::size_t>("jobs", [](C& c) -> auto& { return c.jobs; }),
      number_key<std::size_t>("max_per_stratum", [](C& c) -> auto& { return c.max_per_stratum; }),
      number_key<double>("learning_rate", [](C& c) -> auto& { return c.train.learning_rate; }),
      number_key<int>("epochs", [](C& c) -> auto& { return c.train.epochs; }),
      number_key<std::size_t>("batch_size", [](C& c) -> auto& { return c.train.batch_size; }),
      number_key<double>("clip_norm", [](C& c) -> auto& { return c.train.clip_norm; }),
      number_key<double>("beta1", [](C& c) -> auto& { return c.train.beta1; }),
      number_key<double>("beta2", [](C& c) -> auto& { return c.train.beta2; }),
      number_key<double>("adam_epsilon", [](C& c) -> auto& { return c.train.epsilon; }),
      number_key<int>("hidden_dim", [](C& c) -> auto& { return c.encoder.hidden_dim; }),
      number_key<int>("layers", [](C& c) -> auto& { return c.encoder.layers; }),
      number_key<int>("ff_dim", [](C& c) -> auto& { return c.encoder.ff_dim; }),
      number_key<int>("max_len", [](C& c) -> auto& { return c.encoder.max_len; }),
      bool_key("positional", [](C& c) -> auto& { return c.encoder.positional; }),
      number_key<int>("min_freq", [](C& c) -> auto& { return c.min_freq; }),
      number_key<int>("projection_dim", [](C& c) -> auto& { return c.projection_dim; }),
      number_key<std::size_t>("contrastive_batch", [](C& c) -> auto& { return c.contrastive_batch; }),
      number_key<double>("temperature", [](C& c) -> auto& { return c.temperature; }),
      number_key<int>("gan.noise_dim", [](C& c) -> auto& { return c.gan_noise_dim; }),
      number_key<int>("gan.hidden", [](C& c) -> auto& { return c.gan_hidden; }),
      bool_key("gan.freeze_encoder", [](C& c) -> auto& { return c.gan_freeze_encoder; }),
      number_key<int>("observer_order", [](C& c) -> auto& { return c.observer_order; }),
      number_key<int>("performer_order", [](C& c) -> auto& { return c.performer_order; }),
      number_key<double>("lm_smoothing", [](C& c) -> auto& { return c.lm_smoothing; }),
      string_key("observer_command", [](C& c) -> auto& { return c.observer_command; }),
      string_key("performer_command", [](C& c) -> auto& { return c.performer_command; }),
      number_key<double>("target_fpr", [](C& c) -> auto& { return c.target_fpr; }),
      number_key<int>("mc_samples", [](C& c) -> auto& { return c.mc_samples; }),
      number_key<std::size_t>("adapt.k", [](C& c) -> auto& { return c.adapt_k; }),
      number_key<double>("adapt.alpha", [](C& c) -> auto& { return c.adapt_alpha; }),
      string_key("adapt.generator", [](C& c) -> auto& { return c.adapt_generator; }),
      string_key("attack.victim", [](C& c) -> auto& { return c.attack_victim; }),
      string_key("attack.dataset", [](C& c) -> auto& { return c.attack_dataset; }),
      number_key<int>("attack.suffix_len", [](C& c) -> auto& { return c.attack.attack.suffix_len; }),
      number_key<int>("attack.steps", [](C& c) -> auto& { return c.attack.attack.steps; }),
      number_key<int>("attack.top_k", [](C& c) -> auto& { return c.attack.attack.top_k; }),
      number_key<int>("attack.batch_eval", [](C& c) -> auto& { return c.attack.attack.batch_eval; }),
      string_key("attack.init_token", [](C& c) -> auto& { return c.attack.attack.init_token; }),
      bool_key("attack.early_stop", [](C& c) -> auto& { return c.attack.attack.early_stop; }),
      number_key<double>("attack.typo_rate", [](C& c) -> auto& { return c.attack.typo_rate; }),
      number_key<int>("attack.quote_style", [](C& c) -> auto& { return c.attack.quote_style; }),
      number_key<std::size_t>("attack.max_samples", [](C& c) -> auto& { return c.attack.max_samples; }),
  };
  return k;
}

void assign(ExperimentConfig& cfg, const std::string& key, const std::string& value, const fs::path& base) {
  if (key.rfind("eval.", 0) == 0) {
    const auto name = key.substr(5);
    if (name.empty()) throw ConfigError("eval.<name> needs a dataset name");
    auto it = std::find_if(cfg.eval_sets.begin(), cfg.eval_sets.end(), [&](const auto& e) { return e.first == name; });
    if (it != cfg.eval_sets.end()) it->second = resolve(base, value);
    else cfg.eval_sets.emplace_back(name, resolve(base, value));
    return;
  }
  for (const auto& k : keys()) {
    if (k.name == key) {
      k.set(cfg, value, base);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    assign(cfg, trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)), base_dir);
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return parse_config(text, path.parent_path());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  assign(cfg, trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1)), {});
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& k : keys()) {
    if (k.name == "output" || k.name == "jobs") continue;  // do not affect results
    out += k.name + " = " + k.get(*this) + "\n";
  }
  for (const auto& [name, path] : eval_sets) out += "eval." + name + " = " + path.generic_string() + "\n";
  return out;
}

void ExperimentConfig::validate() const {
  auto need = [](const fs::path& p, const std::string& what) {
    if (p.empty()) throw ConfigError(what + " path is not set");
    if (!fs::is_regular_file(p)) throw ConfigError(what + " dataset not found: " + p.string());
  };
  need(train_path, "train");
  if (eval_sets.empty()) throw ConfigError("no eval.<name> datasets configured");
  for (const auto& [name, p] : eval_sets) need(p, "eval." + name);
  if (unseen_path) need(*unseen_path, "unseen");
  if (detectors.empty()) throw ConfigError("no detectors selected");
  for (const auto& d : detectors) {
    if (d != "supervised" && d != "scl" && d != "gan" && !parse_training_free(d)) {
      throw ConfigError("unknown detector '" + d + "'");
    }
  }
  try {
    train.validate();
    attack.attack.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  if (encoder.hidden_dim < 1 || encoder.layers < 0 || encoder.ff_dim < 1 || encoder.max_len < 1) {
    throw ConfigError("encoder dimensions must be positive");
  }
  if (projection_dim < 1) throw ConfigError("projection_dim must be >= 1");
  if (min_freq < 1) throw ConfigError("min_freq must be >= 1");
  if (!(temperature > 0)) throw ConfigError("temperature must be > 0");
  if (!(target_fpr >= 0 && target_fpr < 1)) throw ConfigError("target_fpr must lie in [0, 1)");
  if (mc_samples != 0 && mc_samples < 2) throw ConfigError("mc_samples must be 0 or >= 2");
  if (!(adapt_alpha >= 0 && adapt_alpha <= 1)) throw ConfigError("adapt.alpha must lie in [0, 1]");
  if (!(attack.typo_rate >= 0 && attack.typo_rate <= 1)) throw ConfigError("attack.typo_rate must lie in [0, 1]");
  if (attack.quote_style < 0 || attack.quote_style >= kQuoteStyles) throw ConfigError("attack.quote_style out of range");
  if (!attack_victim.empty()) {
    if (std::find(detectors.begin(), detectors.end(), attack_victim) == detectors.end() ||
        (attack_victim != "supervised" && attack_victim != "scl" && attack_victim != "gan")) {
      throw ConfigError("attack.victim must be one of the selected trainable detectors");
    }
    if (!attack_dataset.empty() &&
        std::none_of(eval_sets.begin(), eval_sets.end(), [&](const auto& e) { return e.first == attack_dataset; })) {
      throw ConfigError("attack.dataset '" + attack_dataset + "' is not a configured eval dataset");
    }
  }
}

// ---------------------------------------------------------------------------
// training

EncoderSpec encoder_spec(const ExperimentConfig& cfg) { return cfg.encoder; }

TrainConfig train_config(const ExperimentConfig& cfg, std::uint64_t salt) {
  auto t = cfg.train;
  t.seed = cfg.seed * 1000 + salt;
  return t;
}

SupervisedDetector train_supervised_detector(const ExperimentConfig& cfg, const Corpus& train) {
  const auto tc = train_config(cfg, 1);
  auto d = make_supervised_detector(train, encoder_spec(cfg), tc.seed, cfg.min_freq);
  train_bce(d, train, tc);
  return d;
}

StyleModel train_style_model(const ExperimentConfig& cfg, const Corpus& train) {
  SclConfig sc;
  sc.train = train_config(cfg, 2);
  sc.contrastive_batch = cfg.contrastive_batch;
  sc.temperature = cfg.temperature;
  auto m = make_style_model(train, encoder_spec(cfg), cfg.projection_dim, sc.train.seed, cfg.min_freq);
  train_scl(m, train, sc);
  return m;
}

GanDetector train_gan_detector(const ExperimentConfig& cfg, const Corpus& train) {
  GanConfig gc;
  gc.train = train_config(cfg, 3);
  gc.noise_dim = cfg.gan_noise_dim;
  gc.generator_hidden = cfg.gan_hidden;
  gc.discriminator_hidden = cfg.gan_hidden;
  gc.freeze_encoder = cfg.gan_freeze_encoder;
  auto d = make_gan_detector(train, encoder_spec(cfg), gc, cfg.min_freq);
  gan_train(d, train, gc);
  return d;
}

// ---------------------------------------------------------------------------
// detectors

namespace {

class SupervisedAdapter final : public Detector {
 public:
  explicit SupervisedAdapter(SupervisedDetector d) : d_(std::move(d)) {}
  std::string method() const override { return "Supervised (BCE)"; }
  DetectionScore score(const std::string& text) const override {
    const double p = predict_proba(d_, text);
    return {p, decide(p, d_.threshold)};
  }
  std::unique_ptr<Victim> victim() const override { return std::make_unique<SupervisedVictim>(d_); }

 private:
  SupervisedDetector d_;
};

class SclAdapter final : public Detector {
 public:
  SclAdapter(StyleModel m, CentroidPair c) : m_(std::move(m)), c_(std::move(c)) {}
  std::string method() const override { return "SCL (centroid)"; }
  DetectionScore score(const std::string& text) const override {
    const auto d = centroid_classify(m_, c_, text);
    return {d.margin, d.label};
  }
  std::unique_ptr<Victim> victim() const override { return std::make_unique<CentroidVictim>(m_, c_); }

 private:
  StyleModel m_;
  CentroidPair c_;
};

class GanAdapter final : public Detector {
 public:
  explicit GanAdapter(GanDetector d) : d_(std::move(d)) {}
  std::string method() const override { return "GAN baseline"; }
  DetectionScore score(const std::string& text) const override {
    const auto l = gan_logits(d_, text);
    return {gan_ai_probability(l), gan_verdict(l)};
  }
  std::unique_ptr<Victim> victim() const override { return std::make_unique<GanVictim>(d_); }

 private:
  GanDetector d_;
};

class TrainingFreeAdapter final : public Detector {
 public:
  TrainingFreeAdapter(TrainingFreeMethod m, Tokenizer tok, std::shared_ptr<const CausalLM> obs,
                      std::shared_ptr<const CausalLM> perf, int mc_samples, std::uint64_t seed)
      : method_(m), tok_(std::move(tok)), obs_(std::move(obs)), perf_(std::move(perf)), mc_samples_(mc_samples),
        seed_(seed) {}

  std::string method() const override {
    switch (method_) {
      case TrainingFreeMethod::Perplexity: return "Perplexity";
      case TrainingFreeMethod::Binoculars: return "Binoculars";
      case TrainingFreeMethod::FastDetect: return "Fast-DetectGPT";
    }
    return "?";
  }
  ScoreOrientation orientation() const {
    return method_ == TrainingFreeMethod::FastDetect ? ScoreOrientation::AiIfGreater : ScoreOrientation::AiIfLower;
  }
  double raw(const std::string& text) const {
    const auto ids = tok_.tokenize(text);
    switch (method_) {
      case TrainingFreeMethod::Perplexity: return log_perplexity(*obs_, ids);
      case TrainingFreeMethod::Binoculars: return binoculars_score(*obs_, *perf_, ids);
      case TrainingFreeMethod::FastDetect:
        return mc_samples_ > 0 ? sampling_discrepancy_mc(*obs_, ids, mc_samples_, seed_) : sampling_discrepancy(*obs_, ids);
    }
    return 0.0;
  }
  DetectionScore score(const std::string& text) const override {
    const double s = raw(text);
    return {s, threshold_verdict(s, threshold_, orientation())};
  }
  void set_threshold(double t) { threshold_ = t; }

 private:
  TrainingFreeMethod method_;
  Tokenizer tok_;
  std::shared_ptr<const CausalLM> obs_, perf_;
  int mc_samples_;
  std::uint64_t seed_;
  double threshold_ = 0.0;
};

}  // namespace

std::unique_ptr<Detector> supervised_detector(SupervisedDetector d) {
  return std::make_unique<SupervisedAdapter>(std::move(d));
}
std::unique_ptr<Detector> scl_detector(StyleModel m, CentroidPair c) {
  return std::make_unique<SclAdapter>(std::move(m), std::move(c));
}
std::unique_ptr<Detector> gan_detector(GanDetector d) { return std::make_unique<GanAdapter>(std::move(d)); }

std::optional<TrainingFreeMethod> parse_training_free(const std::string& name) {
  if (name == "perplexity" || name == "ppl") return TrainingFreeMethod::Perplexity;
  if (name == "binoculars") return TrainingFreeMethod::Binoculars;
  if (name == "fastdetect") return TrainingFreeMethod::FastDetect;
  return std::nullopt;
}

std::unique_ptr<Detector> training_free_detector(TrainingFreeMethod method, const ExperimentConfig& cfg,
                                                 const Corpus& train, const Corpus& calibration) {
  auto tok = Tokenizer::build(train, cfg.min_freq, cfg.encoder.max_len);
  auto make = [&](const std::string& command, int order) -> std::shared_ptr<const CausalLM> {
    if (!command.empty()) return std::make_shared<ExternalLM>(command);
    return std::make_shared<NGramLM>(NGramLM::fit(tok, train, order, cfg.lm_smoothing));
  };
  auto obs = make(cfg.observer_command, cfg.observer_order);
  auto perf = make(cfg.performer_command, cfg.performer_order);
  if (obs->vocab_size() != tok.vocab_size()) throw ContractError("observer LM vocabulary does not match the tokenizer");
  auto d = std::make_unique<TrainingFreeAdapter>(method, std::move(tok), obs, perf, cfg.mc_samples, cfg.seed);

  std::vector<double> scores(calibration.size());
  parallel_for(calibration.size(), cfg.jobs, [&](std::size_t i) { scores[i] = d->raw(calibration[i].text); });
  std::vector<double> human, ai;
  for (std::size_t i = 0; i < calibration.size(); ++i) {
    (calibration[i].label == Label::Human ? human : ai).push_back(scores[i]);
  }
  d->set_threshold(calibrate_threshold(human, ai, cfg.target_fpr, d->orientation()));
  return d;
}

// ---------------------------------------------------------------------------
// predictions

std::vector<RawPrediction> predict_corpus(const Detector& detector, const Corpus& corpus, std::size_t jobs) {
  std::vector<RawPrediction> out(corpus.size());
  parallel_for(corpus.size(), jobs, [&](std::size_t i) {
    const auto& r = corpus[i];
    const auto s = detector.score(r.text);
    out[i] = {r.record_id, s.score, s.verdict, r.label};
  });
  return out;
}

ConfusionCounts counts_of(std::span<const RawPrediction> predictions) {
  std::vector<Prediction> p;
  p.reserve(predictions.size());
  for (const auto& r : predictions) p.push_back({r.verdict, r.label});
  return accumulate(p);
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else if (!out.empty() && out.back() != '-') out += '-';
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

}  // namespace

std::string predictions_jsonl(std::span<const RawPrediction> predictions) {
  std::string out;
  for (const auto& p : predictions) {
    nlohmann::ordered_json j = {{"record_id", p.record_id},
                                {"score", fixed(p.score, 6)},
                                {"verdict", to_string(p.verdict)},
                                {"label", to_string(p.label)}};
    out += j.dump() + "\n";
  }
  return out;
}

std::string PredictionFile::file_name() const { return slug(dataset) + "__" + slug(method) + ".jsonl"; }

// ---------------------------------------------------------------------------
// run

namespace {

Corpus load_dataset(const fs::path& p, const std::string& name, const ExperimentConfig& cfg) {
  auto c = load_jsonl(p);
  if (c.empty()) throw EmptyInputError("dataset '" + name + "' is empty");
  if (cfg.max_per_stratum) c = cap_per_stratum(c, cfg.max_per_stratum, cfg.seed);
  return c;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

ReportBundle run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ReportBundle bundle;
  bundle.canonical_config = cfg.canonical();
  bundle.config_hash = checksum_hex(fnv1a(bundle.canonical_config));

  const auto train = load_dataset(cfg.train_path, "train", cfg);
  std::vector<std::pair<std::string, Corpus>> evals;
  for (const auto& [name, p] : cfg.eval_sets) evals.emplace_back(name, load_dataset(p, name, cfg));
  std::optional<Corpus> unseen;
  if (cfg.unseen_path) unseen = load_jsonl(*cfg.unseen_path);

  std::vector<std::pair<std::string, std::unique_ptr<Detector>>> detectors;
  std::optional<StyleModel> style;
  for (const auto& name : cfg.detectors) {
    if (name == "supervised") {
      auto d = train_supervised_detector(cfg, train);
      bundle.checkpoint_hashes[name] = checksum_hex(checksum(d.parameters()));
      detectors.emplace_back(name, supervised_detector(std::move(d)));
    } else if (name == "scl") {
      auto m = train_style_model(cfg, train);
      auto c = compute_centroids(m, train);
      c.source_checkpoint_hash = checksum_hex(m.checksum());
      bundle.checkpoint_hashes[name] = c.source_checkpoint_hash;
      style = m;
      detectors.emplace_back(name, scl_detector(std::move(m), std::move(c)));
    } else if (name == "gan") {
      auto d = train_gan_detector(cfg, train);
      std::vector<const ad::Parameter*> ps;
      for (auto* p : d.encoder.parameters()) ps.push_back(p);
      for (auto* p : d.discriminator.parameters()) ps.push_back(p);
      bundle.checkpoint_hashes[name] = checksum_hex(checksum(ps));
      detectors.emplace_back(name, gan_detector(std::move(d)));
    } else {
      // Proxy LMs fit on one part of the training texts, threshold calibrated on the rest:
      // in-sample n-gram likelihoods are far higher than on unseen text.
      const auto parts = stratified_split(train, {0.7, 0.15, 0.15}, cfg.seed);
      std::vector<TextRecord> held(parts.val.begin(), parts.val.end());
      held.insert(held.end(), parts.test.begin(), parts.test.end());
      detectors.emplace_back(name, training_free_detector(*parse_training_free(name), cfg, parts.train,
                                                          Corpus("calibration", std::move(held))));
    }
  }

  for (const auto& [dataset, corpus] : evals) {
    for (const auto& [name, det] : detectors) {
      PredictionFile pf{dataset, det->method(), predict_corpus(*det, corpus, cfg.jobs)};
      bundle.metrics.push_back({dataset, det->method(), counts_of(pf.predictions)});
      bundle.predictions.push_back(std::move(pf));
    }
  }

  if (unseen && style) {
    std::optional<std::string> gen;
    if (!cfg.adapt_generator.empty()) gen = cfg.adapt_generator;
    bundle.adaptation.push_back(few_shot_eval(*style, train, *unseen, cfg.adapt_k, cfg.seed, cfg.adapt_alpha, gen));
  }

  if (!cfg.attack_victim.empty()) {
    const auto& target = cfg.attack_dataset.empty() ? evals.front() : *std::find_if(evals.begin(), evals.end(), [&](const auto& e) {
      return e.first == cfg.attack_dataset;
    });
    for (const auto& [name, det] : detectors) {
      if (name != cfg.attack_victim) continue;
      auto suite = cfg.attack;
      suite.attack.seed = cfg.seed;
      bundle.attacks = run_attack_suite(*det->victim(), target.second, suite);
    }
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// reports

std::string adaptation_json(std::span<const FewShotResult> rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    const auto z = metrics(r.zero_shot), k = metrics(r.k_shot);
    arr.push_back({{"target_generator", r.target_generator},
                   {"k", r.k},
                   {"alpha", fixed(r.alpha, 4)},
                   {"eval_size", r.eval_size},
                   {"zero_shot", {{"accuracy", format_percent(z.accuracy)}, {"f1", format_percent(z.f1)},
                                  {"fpr", format_percent(z.fpr)}}},
                   {"k_shot", {{"accuracy", format_percent(k.accuracy)}, {"f1", format_percent(k.f1)},
                               {"fpr", format_percent(k.fpr)}}},
                   {"accuracy_gain", format_percent(k.accuracy - z.accuracy)},
                   {"adaptation_ids", r.adaptation_ids}});
  }
  return arr.dump(2) + "\n";
}

std::string adaptation_plot_csv(std::span<const FewShotResult> rows) {
  std::string out = "generator,setting,k,accuracy,f1\n";
  for (const auto& r : rows) {
    const auto z = metrics(r.zero_shot), k = metrics(r.k_shot);
    out += r.target_generator + ",zero-shot,0," + format_percent(z.accuracy) + "," + format_percent(z.f1) + "\n";
    out += r.target_generator + "," + std::to_string(r.k) + "-shot," + std::to_string(r.k) + "," +
           format_percent(k.accuracy) + "," + format_percent(k.f1) + "\n";
  }
  return out;
}

std::string metadata_json(const ReportBundle& b) {
  nlohmann::ordered_json j;
  j["tool"] = "detectlab";
  j["version"] = kVersion;
  j["checkpoint_format_version"] = kCheckpointVersion;
  j["quote_template_version"] = kQuoteTemplateVersion;
  j["config_hash"] = b.config_hash;
  j["config"] = b.canonical_config;
  j["checkpoint_hashes"] = b.checkpoint_hashes;
  auto files = nlohmann::ordered_json::array();
  for (const auto& p : b.predictions) {
    files.push_back({{"dataset", p.dataset}, {"method", p.method}, {"file", "predictions/" + p.file_name()}});
  }
  j["prediction_files"] = files;
  return j.dump(2) + "\n";
}

void emit_reports(const ReportBundle& b, const fs::path& outdir) {
  std::error_code ec;
  fs::create_directories(outdir / "predictions", ec);
  if (ec) throw IoError("cannot create output directory " + outdir.string() + ": " + ec.message());
  write_file(outdir / "metrics.csv", metrics_csv(b.metrics));
  write_file(outdir / "metrics.json", metrics_json(b.metrics));
  write_file(outdir / "metrics.txt", metrics_table(b.metrics));
  write_file(outdir / "attacks.json", attacks_json(b.attacks));
  write_file(outdir / "attacks.txt", b.attacks.empty() ? std::string() : attack_table(b.attacks));
  write_file(outdir / "attack_transcripts.jsonl", transcripts_jsonl(b.attacks));
  write_file(outdir / "adaptation.json", adaptation_json(b.adaptation));
  write_file(outdir / "adaptation_plot.csv", adaptation_plot_csv(b.adaptation));
  write_file(outdir / "metadata.json", metadata_json(b));
  for (const auto& p : b.predictions) write_file(outdir / "predictions" / p.file_name(), predictions_jsonl(p.predictions));
}

}  // namespace detectlab
