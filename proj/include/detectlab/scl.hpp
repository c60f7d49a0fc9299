#ifndef DETECTLAB_SCL_HPP
#define DETECTLAB_SCL_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detectlab/corpus.hpp"
#include "detectlab/encoder.hpp"
#include "detectlab/evalkit.hpp"
#include "detectlab/losses.hpp"
#include "detectlab/train_config.hpp"

namespace detectlab {

// Encoder + projection head producing unit-norm style embeddings.
struct StyleModel {
  Tokenizer tokenizer;
  EncoderModel encoder;
  ProjectionHead head;

  ad::Vector embed(std::string_view text) const;
  ad::Vector embed_ids(std::span<const int> ids) const;
  ad::Var forward(ad::Tape& tape, std::span<const int> ids) const;

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  std::uint64_t checksum() const;
};

StyleModel make_style_model(const Corpus& train, EncoderSpec spec, int projection_dim, std::uint64_t seed,
                            int min_freq = 2);

struct SclConfig {
  TrainConfig train;
  std::size_t contrastive_batch = 16;
  double temperature = losses::kDefaultTemperature;
};

// Minimizes InfoNCE over freshly planned contrastive batches each epoch.
// History holds the mean batch loss per epoch.
TrainHistory train_scl(StyleModel& model, const Corpus& corpus, const SclConfig& cfg);

struct CentroidPair {
  ad::Vector human;
  ad::Vector ai;
  std::size_t human_count = 0;
  std::size_t ai_count = 0;
  double alpha = 1.0;
  std::string source_checkpoint_hash;
};

// normalize(mean) per class. Throws ValidationError naming a missing class and
// DegenerateError when a class mean has norm < 1e-12.
CentroidPair compute_centroids(std::span<const losses::LabeledEmbedding> samples);
CentroidPair compute_centroids(const StyleModel& model, const Corpus& corpus);

struct CentroidDecision {
  Label label;
  // cos(z, c_ai) - cos(z, c_human)
  double margin;
};

// AI iff margin > 0; |margin| < 1e-12 counts as a tie and goes to HUMAN.
CentroidDecision centroid_classify(const CentroidPair& centroids, const ad::Vector& embedding);
CentroidDecision centroid_classify(const StyleModel& model, const CentroidPair& centroids, std::string_view text);

struct AdaptationSet {
  std::vector<std::string> texts;
  double alpha = 1.0;
};

// c_ai' = normalize(alpha * mean(adaptation) + (1 - alpha) * c_ai); c_human untouched.
CentroidPair adapt_ai_centroid(const CentroidPair& centroids, std::span<const ad::Vector> adaptation,
                               double alpha);
CentroidPair adapt_ai_centroid(const StyleModel& model, const CentroidPair& centroids,
                               const AdaptationSet& adaptation);

struct FewShotResult {
  std::string target_generator;
  std::size_t k = 0;
  double alpha = 1.0;
  ConfusionCounts zero_shot;
  ConfusionCounts k_shot;
  std::vector<std::string> adaptation_ids;
  std::size_t eval_size = 0;
};

// Classifies `eval` with the base centroids and with the adapted ones. Throws
// ValidationError when any record id appears in both sets.
FewShotResult few_shot_eval_sets(const StyleModel& model, const CentroidPair& base, const Corpus& adaptation,
                                 const Corpus& eval, double alpha);

// Centroids from `base_corpus`; k AI records of the target generator drawn
// from `target_corpus` by seed for adaptation, the remainder evaluated.
FewShotResult few_shot_eval(const StyleModel& model, const Corpus& base_corpus, const Corpus& target_corpus,
                            std::size_t k, std::uint64_t seed, double alpha = 1.0,
                            std::optional<std::string> target_generator = std::nullopt);

std::string centroids_to_json(const CentroidPair& centroids);
CentroidPair centroids_from_json(const std::string& json_text);

}  // namespace detectlab

#endif  // DETECTLAB_SCL_HPP
