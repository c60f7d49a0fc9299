#include "detectlab/supervised.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "detectlab/errors.hpp"
#include "detectlab/losses.hpp"
#include "detectlab/optim.hpp"

namespace detectlab {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Label decide(double probability, double threshold) {
  return probability >= threshold ? Label::Ai : Label::Human;
}

ClassifierHead::ClassifierHead(int input_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  ad::Matrix w(input_dim, 1);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = dist(rng);
  weight_ = ad::Parameter("head.weight", std::move(w));
  bias_ = ad::Parameter("head.bias", ad::Matrix::Zero(1, 1));
}

ClassifierHead ClassifierHead::zeros(int input_dim) {
  ClassifierHead h;
  h.weight_ = ad::Parameter("head.weight", ad::Matrix::Zero(input_dim, 1));
  h.bias_ = ad::Parameter("head.bias", ad::Matrix::Zero(1, 1));
  return h;
}

ad::Var ClassifierHead::forward(ad::Tape& tape, ad::Var hidden) const {
  return tape.add(tape.matmul(hidden, tape.param(weight_)), tape.param(bias_));
}

double ClassifierHead::probability(const ad::Vector& hidden) const {
  return sigmoid(hidden.dot(weight_.value.col(0)) + bias_.value(0, 0));
}

std::vector<ad::Parameter*> ClassifierHead::parameters() { return {&weight_, &bias_}; }
std::vector<const ad::Parameter*> ClassifierHead::parameters() const { return {&weight_, &bias_}; }

std::vector<ad::Parameter*> SupervisedDetector::parameters() {
  auto ps = encoder.parameters();
  for (auto* p : head.parameters()) ps.push_back(p);
  return ps;
}

std::vector<const ad::Parameter*> SupervisedDetector::parameters() const {
  auto ps = encoder.parameters();
  for (auto* p : head.parameters()) ps.push_back(p);
  return ps;
}

SupervisedDetector make_supervised_detector(const Corpus& train, EncoderSpec spec, std::uint64_t seed,
                                            int min_freq) {
  SupervisedDetector d;
  d.tokenizer = Tokenizer::build(train, min_freq, spec.max_len);
  spec.vocab_size = d.tokenizer.vocab_size();
  d.encoder = EncoderModel(spec, seed);
  d.head = ClassifierHead(spec.hidden_dim, seed + 1);
  return d;
}

double predict_proba_ids(const SupervisedDetector& detector, std::span<const int> ids) {
  return detector.head.probability(detector.encoder.encode(ids));
}

double predict_proba(const SupervisedDetector& detector, std::string_view text) {
  return predict_proba_ids(detector, detector.tokenizer.tokenize(text));
}

Label predict(const SupervisedDetector& detector, std::string_view text) {
  return decide(predict_proba(detector, text), detector.threshold);
}

double bce_batch_step(SupervisedDetector& detector, std::span<const LabeledIds* const> batch) {
  if (batch.empty()) throw EmptyInputError("empty training batch");
  const auto params = detector.parameters();
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto* sample : batch) {
    ad::Tape tape;
    auto logit = detector.head.forward(tape, detector.encoder.forward(tape, sample->ids));
    const double p = sigmoid(logit.value()(0, 0));
    total += losses::bce(sample->label, p);
    // d bce(y, sigmoid(s)) / ds = p - y
    tape.backward(logit, ad::Matrix::Constant(1, 1, (p - sample->label) * inv));
    tape.accumulate_into(params);
  }
  return total * inv;
}

TrainHistory train_bce(SupervisedDetector& detector, const Corpus& corpus, const TrainConfig& cfg) {
  cfg.validate();
  if (corpus.count(Label::Human) == 0 || corpus.count(Label::Ai) == 0) {
    throw TrainingError("training corpus must contain both classes");
  }
  std::vector<LabeledIds> samples;
  samples.reserve(corpus.size());
  for (const auto& r : corpus) {
    samples.push_back({detector.tokenizer.tokenize(r.text), r.label == Label::Ai ? 1 : 0});
  }

  TrainHistory history;
  if (cfg.epochs == 0) return history;

  Adam optimizer(detector.parameters(), cfg.adam());
  optimizer.zero_grad();
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<const LabeledIds*> batch;
      for (auto i = start; i < stop; ++i) batch.push_back(&samples[order[i]]);
      sum += bce_batch_step(detector, batch) * static_cast<double>(batch.size());
      optimizer.step();
    }
    history.epoch_loss.push_back(sum / static_cast<double>(samples.size()));
  }
  return history;
}

}  // namespace detectlab
