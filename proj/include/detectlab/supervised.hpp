#ifndef DETECTLAB_SUPERVISED_HPP
#define DETECTLAB_SUPERVISED_HPP

#include <span>
#include <string_view>
#include <vector>

#include "detectlab/corpus.hpp"
#include "detectlab/encoder.hpp"
#include "detectlab/train_config.hpp"

namespace detectlab {

// p = sigmoid(w . h + b)
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(int input_dim, std::uint64_t seed);
  static ClassifierHead zeros(int input_dim);

  int input_dim() const { return static_cast<int>(weight_.value.rows()); }
  // 1 x 1 logit.
  ad::Var forward(ad::Tape& tape, ad::Var hidden) const;
  double probability(const ad::Vector& hidden) const;

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

 private:
  ad::Parameter weight_;
  ad::Parameter bias_;
};

double sigmoid(double x);

// AI iff p >= threshold.
Label decide(double probability, double threshold);

struct SupervisedDetector {
  Tokenizer tokenizer;
  EncoderModel encoder;
  ClassifierHead head;
  double threshold = 0.5;

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
};

// Tokenizer from `train`, randomly initialized encoder and head.
SupervisedDetector make_supervised_detector(const Corpus& train, EncoderSpec spec, std::uint64_t seed,
                                            int min_freq = 2);

double predict_proba(const SupervisedDetector& detector, std::string_view text);
double predict_proba_ids(const SupervisedDetector& detector, std::span<const int> ids);
Label predict(const SupervisedDetector& detector, std::string_view text);

struct LabeledIds {
  std::vector<int> ids;
  int label = 0;
};

// Mean BCE over the batch; adds d(mean loss)/d(params) into the parameters' grads.
double bce_batch_step(SupervisedDetector& detector, std::span<const LabeledIds* const> batch);

TrainHistory train_bce(SupervisedDetector& detector, const Corpus& corpus, const TrainConfig& cfg);

}  // namespace detectlab

#endif  // DETECTLAB_SUPERVISED_HPP
