#ifndef DETECTLAB_GAN_HPP
#define DETECTLAB_GAN_HPP

#include <string_view>
#include <vector>

#include "detectlab/corpus.hpp"
#include "detectlab/encoder.hpp"
#include "detectlab/train_config.hpp"

namespace detectlab {

// Discriminator output classes: the two task labels plus FAKE.
enum class GanClass { Human = 0, Ai = 1, Fake = 2 };
inline constexpr int kGanClasses = 3;

// Noise -> tanh hidden -> embedding.
class Generator {
 public:
  Generator() = default;
  Generator(int noise_dim, int hidden_dim, int output_dim, std::uint64_t seed);
  static Generator zeros(int noise_dim, int hidden_dim, int output_dim);

  int noise_dim() const { return static_cast<int>(w1_.value.rows()); }
  int output_dim() const { return static_cast<int>(w2_.value.cols()); }
  ad::Var forward(ad::Tape& tape, ad::Var noise) const;
  ad::Vector generate(const ad::Vector& noise) const;

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

 private:
  ad::Parameter w1_, b1_, w2_, b2_;
};

// Embedding -> tanh hidden -> 3 logits.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(int input_dim, int hidden_dim, std::uint64_t seed);

  ad::Var forward(ad::Tape& tape, ad::Var embedding) const;
  ad::Vector logits(const ad::Vector& embedding) const;

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

 private:
  ad::Parameter w1_, b1_, w2_, b2_;
};

ad::Vector softmax(const ad::Vector& logits);

// Argmax over HUMAN vs AI after dropping FAKE; exact ties go to HUMAN.
Label gan_verdict(const ad::Vector& logits);
// P(AI) renormalized over the two task labels.
double gan_ai_probability(const ad::Vector& logits);

struct GanConfig {
  TrainConfig train;
  int noise_dim = 32;
  int generator_hidden = 64;
  int discriminator_hidden = 64;
  bool freeze_encoder = false;
};

struct GanDetector {
  Tokenizer tokenizer;
  EncoderModel encoder;
  Generator generator;
  Discriminator discriminator;
};

GanDetector make_gan_detector(const Corpus& train, EncoderSpec spec, const GanConfig& cfg, int min_freq = 2);

struct GanHistory {
  std::vector<double> discriminator_loss;
  std::vector<double> generator_loss;
};

// Alternating 1:1 updates. Discriminator: 3-class cross-entropy on real
// embeddings with true labels plus FAKE on generated ones. Generator:
// -log(1 - P(FAKE)) on its outputs.
GanHistory gan_train(GanDetector& detector, const Corpus& corpus, const GanConfig& cfg);

ad::Vector gan_logits(const GanDetector& detector, std::string_view text);
Label gan_predict(const GanDetector& detector, std::string_view text);

}  // namespace detectlab

#endif  // DETECTLAB_GAN_HPP
