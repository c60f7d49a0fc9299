#include "detectlab/gan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "detectlab/errors.hpp"
#include "detectlab/optim.hpp"

namespace detectlab {

namespace {

ad::Parameter uniform_param(const std::string& name, Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  ad::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return ad::Parameter(name, std::move(m));
}

ad::Parameter zero_param(const std::string& name, Eigen::Index r, Eigen::Index c) {
  return ad::Parameter(name, ad::Matrix::Zero(r, c));
}

// Softmax cross-entropy gradient with respect to the logits.
ad::Vector ce_grad(const ad::Vector& logits, int target) {
  ad::Vector g = softmax(logits);
  g(target) -= 1.0;
  return g;
}

double ce(const ad::Vector& logits, int target) {
  const double mx = logits.maxCoeff();
  return mx + std::log((logits.array() - mx).exp().sum()) - logits(target);
}

}  // namespace

Generator::Generator(int noise_dim, int hidden_dim, int output_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  w1_ = uniform_param("gen.w1", noise_dim, hidden_dim, rng);
  b1_ = zero_param("gen.b1", 1, hidden_dim);
  w2_ = uniform_param("gen.w2", hidden_dim, output_dim, rng);
  b2_ = zero_param("gen.b2", 1, output_dim);
}

Generator Generator::zeros(int noise_dim, int hidden_dim, int output_dim) {
  Generator g;
  g.w1_ = zero_param("gen.w1", noise_dim, hidden_dim);
  g.b1_ = zero_param("gen.b1", 1, hidden_dim);
  g.w2_ = zero_param("gen.w2", hidden_dim, output_dim);
  g.b2_ = zero_param("gen.b2", 1, output_dim);
  return g;
}

ad::Var Generator::forward(ad::Tape& tape, ad::Var noise) const {
  auto h = tape.tanh(tape.add_row(tape.matmul(noise, tape.param(w1_)), tape.param(b1_)));
  return tape.add_row(tape.matmul(h, tape.param(w2_)), tape.param(b2_));
}

ad::Vector Generator::generate(const ad::Vector& noise) const {
  if (noise.size() != noise_dim()) throw ContractError("noise has the wrong dimension");
  ad::Tape tape;
  return forward(tape, tape.constant(noise.transpose())).value().row(0).transpose();
}

std::vector<ad::Parameter*> Generator::parameters() { return {&w1_, &b1_, &w2_, &b2_}; }
std::vector<const ad::Parameter*> Generator::parameters() const { return {&w1_, &b1_, &w2_, &b2_}; }

Discriminator::Discriminator(int input_dim, int hidden_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  w1_ = uniform_param("disc.w1", input_dim, hidden_dim, rng);
  b1_ = zero_param("disc.b1", 1, hidden_dim);
  w2_ = uniform_param("disc.w2", hidden_dim, kGanClasses, rng);
  b2_ = zero_param("disc.b2", 1, kGanClasses);
}

ad::Var Discriminator::forward(ad::Tape& tape, ad::Var embedding) const {
  auto h = tape.tanh(tape.add_row(tape.matmul(embedding, tape.param(w1_)), tape.param(b1_)));
  return tape.add_row(tape.matmul(h, tape.param(w2_)), tape.param(b2_));
}

ad::Vector Discriminator::logits(const ad::Vector& embedding) const {
  ad::Tape tape;
  return forward(tape, tape.constant(embedding.transpose())).value().row(0).transpose();
}

std::vector<ad::Parameter*> Discriminator::parameters() { return {&w1_, &b1_, &w2_, &b2_}; }
std::vector<const ad::Parameter*> Discriminator::parameters() const { return {&w1_, &b1_, &w2_, &b2_}; }

ad::Vector softmax(const ad::Vector& logits) {
  ad::Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Label gan_verdict(const ad::Vector& logits) {
  if (logits.size() != kGanClasses) throw ContractError("expected 3 discriminator logits");
  return logits(static_cast<int>(GanClass::Ai)) > logits(static_cast<int>(GanClass::Human)) ? Label::Ai
                                                                                              : Label::Human;
}

double gan_ai_probability(const ad::Vector& logits) {
  if (logits.size() != kGanClasses) throw ContractError("expected 3 discriminator logits");
  // The FAKE logit cancels after renormalization.
  const double h = logits(static_cast<int>(GanClass::Human));
  const double a = logits(static_cast<int>(GanClass::Ai));
  const double m = std::max(h, a);
  return std::exp(a - m) / (std::exp(a - m) + std::exp(h - m));
}

GanDetector make_gan_detector(const Corpus& train, EncoderSpec spec, const GanConfig& cfg, int min_freq) {
  GanDetector d;
  d.tokenizer = Tokenizer::build(train, min_freq, spec.max_len);
  spec.vocab_size = d.tokenizer.vocab_size();
  const auto seed = cfg.train.seed;
  d.encoder = EncoderModel(spec, seed);
  d.generator = Generator(cfg.noise_dim, cfg.generator_hidden, spec.hidden_dim, seed + 11);
  d.discriminator = Discriminator(spec.hidden_dim, cfg.discriminator_hidden, seed + 13);
  return d;
}

GanHistory gan_train(GanDetector& detector, const Corpus& corpus, const GanConfig& cfg) {
  cfg.train.validate();
  if (corpus.count(Label::Human) == 0 || corpus.count(Label::Ai) == 0) {
    throw TrainingError("training corpus must contain both classes");
  }
  if (cfg.noise_dim != detector.generator.noise_dim()) throw ContractError("noise_dim does not match generator");

  struct Sample {
    std::vector<int> ids;
    int label;
  };
  std::vector<Sample> samples;
  for (const auto& r : corpus) {
    samples.push_back({detector.tokenizer.tokenize(r.text), r.label == Label::Ai ? 1 : 0});
  }

  GanHistory history;
  if (cfg.train.epochs == 0) return history;

  auto disc_params = detector.discriminator.parameters();
  if (!cfg.freeze_encoder) {
    for (auto* p : detector.encoder.parameters()) disc_params.push_back(p);
  }
  auto gen_params = detector.generator.parameters();
  Adam disc_opt(disc_params, cfg.train.adam());
  Adam gen_opt(gen_params, cfg.train.adam());
  disc_opt.zero_grad();
  gen_opt.zero_grad();

  std::mt19937_64 rng(cfg.train.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw_noise = [&] {
    ad::Matrix z(1, cfg.noise_dim);
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    return z;
  };

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const int fake = static_cast<int>(GanClass::Fake);
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double d_sum = 0.0, g_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.train.batch_size) {
      const auto stop = std::min(order.size(), start + cfg.train.batch_size);
      const double inv = 1.0 / static_cast<double>(stop - start);

      // Discriminator step.
      double d_loss = 0.0;
      for (auto i = start; i < stop; ++i) {
        const auto& s = samples[order[i]];
        ad::Tape tape;
        auto h = cfg.freeze_encoder ? tape.constant(detector.encoder.encode(s.ids).transpose())
                                    : detector.encoder.forward(tape, s.ids);
        auto logits = detector.discriminator.forward(tape, h);
        const ad::Vector l = logits.value().row(0).transpose();
        d_loss += ce(l, s.label) * inv;
        tape.backward(logits, (ce_grad(l, s.label) * inv).transpose());
        tape.accumulate_into(disc_params);
      }
      for (auto i = start; i < stop; ++i) {
        ad::Tape tape;
        const ad::Vector generated = detector.generator.generate(draw_noise().row(0).transpose());
        auto logits = detector.discriminator.forward(tape, tape.constant(generated.transpose()));
        const ad::Vector l = logits.value().row(0).transpose();
        d_loss += ce(l, fake) * inv;
        tape.backward(logits, (ce_grad(l, fake) * inv).transpose());
        tape.accumulate_into(disc_params);
      }
      disc_opt.step();

      // Generator step: L = -log(1 - P(FAKE)).
      double g_loss = 0.0;
      for (auto i = start; i < stop; ++i) {
        ad::Tape tape;
        auto logits = detector.discriminator.forward(tape, detector.generator.forward(tape, tape.constant(draw_noise())));
        const ad::Vector l = logits.value().row(0).transpose();
        const ad::Vector p = softmax(l);
        const double real_mass = std::max(1.0 - p(fake), 1e-300);
        g_loss += -std::log(real_mass) * inv;
        ad::Vector g = p;
        for (int c = 0; c < fake; ++c) g(c) -= p(c) / real_mass;
        tape.backward(logits, (g * inv).transpose());
        tape.accumulate_into(gen_params);
      }
      gen_opt.step();

      d_sum += d_loss;
      g_sum += g_loss;
      ++batches;
    }
    history.discriminator_loss.push_back(d_sum / static_cast<double>(batches));
    history.generator_loss.push_back(g_sum / static_cast<double>(batches));
  }
  return history;
}

ad::Vector gan_logits(const GanDetector& detector, std::string_view text) {
  return detector.discriminator.logits(detector.encoder.encode(detector.tokenizer.tokenize(text)));
}

Label gan_predict(const GanDetector& detector, std::string_view text) {
  return gan_verdict(gan_logits(detector, text));
}

}  // namespace detectlab
