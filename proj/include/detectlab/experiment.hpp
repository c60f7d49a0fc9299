#ifndef DETECTLAB_EXPERIMENT_HPP
#define DETECTLAB_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "detectlab/adversarial.hpp"
#include "detectlab/corpus.hpp"
#include "detectlab/encoder.hpp"
#include "detectlab/evalkit.hpp"
#include "detectlab/gan.hpp"
#include "detectlab/scl.hpp"
#include "detectlab/supervised.hpp"
#include "detectlab/training_free.hpp"

namespace detectlab {

inline constexpr const char* kVersion = "1.0.0";

// Parsed from a key = value file ('#' starts a comment); every key has a
// default and unknown keys are rejected. `eval.<name> = path` adds a dataset.
struct ExperimentConfig {
  std::filesystem::path train_path;
  std::vector<std::pair<std::string, std::filesystem::path>> eval_sets;
  std::optional<std::filesystem::path> unseen_path;
  std::vector<std::string> detectors = {"supervised", "scl"};
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "detectlab-out";
  std::size_t jobs = 1;
  std::size_t max_per_stratum = 0;

  TrainConfig train;
  EncoderSpec encoder;
  int min_freq = 2;
  int projection_dim = 32;
  std::size_t contrastive_batch = 16;
  double temperature = 0.07;
  int gan_noise_dim = 32;
  int gan_hidden = 64;
  bool gan_freeze_encoder = false;

  // Training-free: proxy n-gram LMs fit on the (unlabeled) training texts,
  // unless a line-JSON subprocess command is given.
  int observer_order = 2;
  int performer_order = 3;
  double lm_smoothing = 0.1;
  std::string observer_command;
  std::string performer_command;
  double target_fpr = 0.05;
  // Fast-DetectGPT: 0 uses the analytic discrepancy, otherwise this many resamples.
  int mc_samples = 0;

  std::size_t adapt_k = 25;
  double adapt_alpha = 1.0;
  std::string adapt_generator;

  // Empty victim disables the attack suite.
  std::string attack_victim;
  std::string attack_dataset;
  SuiteConfig attack;

  // Canonical key = value listing; the config hash is taken over this text.
  std::string canonical() const;
  // Throws ConfigError on bad values or missing files.
  void validate() const;
};

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
// `key=value` override; relative paths resolve against the working directory.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

EncoderSpec encoder_spec(const ExperimentConfig& cfg);
TrainConfig train_config(const ExperimentConfig& cfg, std::uint64_t salt);

SupervisedDetector train_supervised_detector(const ExperimentConfig& cfg, const Corpus& train);
StyleModel train_style_model(const ExperimentConfig& cfg, const Corpus& train);
GanDetector train_gan_detector(const ExperimentConfig& cfg, const Corpus& train);

struct DetectionScore {
  double score = 0.0;
  Label verdict = Label::Human;
};

// A fitted detector that labels single texts. Implementations are safe to
// call concurrently.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::string method() const = 0;
  virtual DetectionScore score(const std::string& text) const = 0;
  // Non-null when the detector can be attacked.
  virtual std::unique_ptr<Victim> victim() const { return nullptr; }
};

std::unique_ptr<Detector> supervised_detector(SupervisedDetector d);
std::unique_ptr<Detector> scl_detector(StyleModel m, CentroidPair c);
std::unique_ptr<Detector> gan_detector(GanDetector d);

enum class TrainingFreeMethod { Perplexity, Binoculars, FastDetect };
std::optional<TrainingFreeMethod> parse_training_free(const std::string& name);

// Builds the proxy LMs from cfg and calibrates the threshold on `calibration`
// at cfg.target_fpr.
std::unique_ptr<Detector> training_free_detector(TrainingFreeMethod method, const ExperimentConfig& cfg,
                                                 const Corpus& train, const Corpus& calibration);

struct RawPrediction {
  std::string record_id;
  double score = 0.0;
  Label verdict = Label::Human;
  Label label = Label::Human;
};

std::vector<RawPrediction> predict_corpus(const Detector& detector, const Corpus& corpus, std::size_t jobs);
ConfusionCounts counts_of(std::span<const RawPrediction> predictions);
std::string predictions_jsonl(std::span<const RawPrediction> predictions);

struct PredictionFile {
  std::string dataset;
  std::string method;
  std::vector<RawPrediction> predictions;
  std::string file_name() const;
};

struct ReportBundle {
  std::vector<MetricsRow> metrics;
  std::vector<AttackReport> attacks;
  std::vector<FewShotResult> adaptation;
  std::vector<PredictionFile> predictions;
  std::string config_hash;
  std::string canonical_config;
  std::map<std::string, std::string> checkpoint_hashes;
};

// Trains the requested detectors on the training set and evaluates them on
// every dataset. All files are checked before any training starts.
ReportBundle run_experiment(const ExperimentConfig& cfg);

std::string adaptation_json(std::span<const FewShotResult> rows);
// generator,setting,k,accuracy,f1 with one row per bar.
std::string adaptation_plot_csv(std::span<const FewShotResult> rows);
std::string metadata_json(const ReportBundle& bundle);

// metrics.csv/json/txt, attacks.json/txt, attack_transcripts.jsonl,
// adaptation.json, adaptation_plot.csv, metadata.json, predictions/*.jsonl.
void emit_reports(const ReportBundle& bundle, const std::filesystem::path& outdir);

}  // namespace detectlab

#endif  // DETECTLAB_EXPERIMENT_HPP
