#include "detectlab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "detectlab/errors.hpp"

namespace detectlab::losses {

namespace {

void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability outside [0, 1]");
}

void check_label(int y) {
  if (y != 0 && y != 1) throw ValidationError("binary label must be 0 or 1");
}

}  // namespace

double bce(int y, double p) {
  check_label(y);
  check_probability(p);
  return y == 1 ? -std::log(std::max(p, kProbEpsilon)) : -std::log(std::max(1.0 - p, kProbEpsilon));
}

double bce(Label y, double p) { return bce(y == Label::Ai ? 1 : 0, p); }

double bce_mean(std::span<const int> y, std::span<const double> p) {
  if (y.size() != p.size()) throw ValidationError("label and probability counts differ");
  if (y.empty()) throw EmptyInputError("bce_mean on an empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sum += bce(y[i], p[i]);
  return sum / static_cast<double>(y.size());
}

double bce_grad(int y, double p) {
  check_label(y);
  check_probability(p);
  return y == 1 ? -1.0 / std::max(p, kProbEpsilon) : 1.0 / std::max(1.0 - p, kProbEpsilon);
}

void validate(const ContrastiveBatch& batch) {
  if (!(batch.temperature > 0.0)) throw ValidationError("temperature must be > 0");
  if (batch.labels.size() != batch.embeddings.size()) throw ContractError("labels and embeddings differ in count");
  if (batch.anchors.empty()) throw EmptyInputError("contrastive batch has no anchors");
  const auto n = batch.embeddings.size();
  for (const auto& a : batch.anchors) {
    if (a.index >= n || a.positive >= n) throw ContractError("anchor index out of range");
    if (a.positive == a.index) throw ContractError("anchor cannot be its own positive");
    if (batch.labels[a.positive] != batch.labels[a.index]) {
      throw ContractError("positive has a different label than its anchor");
    }
    if (std::find(a.candidates.begin(), a.candidates.end(), a.positive) == a.candidates.end()) {
      throw ContractError("candidate set does not contain the positive");
    }
    for (auto k : a.candidates) {
      if (k >= n) throw ContractError("candidate index out of range");
      if (k == a.index) throw ContractError("candidate set contains the anchor");
    }
  }
}

InfoNceResult info_nce_with_grad(const ContrastiveBatch& batch) {
  validate(batch);
  const double tau = batch.temperature;
  const auto& z = batch.embeddings;
  std::vector<double> norms(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    norms[k] = z[k].norm();
    if (!(norms[k] >= 1e-12)) throw DegenerateError("embedding with norm < 1e-12 in contrastive batch");
  }

  InfoNceResult out;
  out.grads.assign(z.size(), ad::Vector::Zero(z.front().size()));
  const double inv_anchors = 1.0 / static_cast<double>(batch.anchors.size());

  for (const auto& a : batch.anchors) {
    const auto& zi = z[a.index];
    const auto m = a.candidates.size();
    std::vector<double> cos(m), logits(m);
    double pos_logit = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const auto k = a.candidates[c];
      cos[c] = zi.dot(z[k]) / (norms[a.index] * norms[k]);
      logits[c] = cos[c] / tau;
      if (k == a.positive) pos_logit = logits[c];
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double l : logits) denom += std::exp(l - mx);
    const double lse = mx + std::log(denom);
    out.loss += (lse - pos_logit) * inv_anchors;

    for (std::size_t c = 0; c < m; ++c) {
      const auto k = a.candidates[c];
      const double weight = std::exp(logits[c] - lse) - (k == a.positive ? 1.0 : 0.0);
      if (weight == 0.0) continue;
      const double coef = weight * inv_anchors / tau;
      // d cos(a, b) / d a = b / (|a||b|) - cos a / |a|^2
      out.grads[a.index] += coef * (z[k] / (norms[a.index] * norms[k]) -
                                    cos[c] * zi / (norms[a.index] * norms[a.index]));
      out.grads[k] += coef * (zi / (norms[a.index] * norms[k]) - cos[c] * z[k] / (norms[k] * norms[k]));
    }
  }
  return out;
}

double info_nce(const ContrastiveBatch& batch) { return info_nce_with_grad(batch).loss; }

std::vector<BatchPlan> plan_contrastive_batches(std::span<const Label> labels, std::size_t batch_size,
                                                std::uint64_t seed) {
  std::vector<std::size_t> human, ai;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == Label::Ai ? ai : human).push_back(i);
  if (human.size() < 2) throw SamplingError("class human has fewer than 2 samples");
  if (ai.size() < 2) throw SamplingError("class ai has fewer than 2 samples");
  if (batch_size < 4) throw SamplingError("contrastive batch size must be >= 4");

  std::mt19937_64 rng(seed);
  std::shuffle(human.begin(), human.end(), rng);
  std::shuffle(ai.begin(), ai.end(), rng);
  const auto n = labels.size();
  auto batches = std::min({(n + batch_size - 1) / batch_size, human.size() / 2, ai.size() / 2});
  batches = std::max<std::size_t>(batches, 1);

  std::vector<BatchPlan> plans(batches);
  for (std::size_t i = 0; i < human.size(); ++i) plans[i % batches].members.push_back(human[i]);
  for (std::size_t i = 0; i < ai.size(); ++i) plans[i % batches].members.push_back(ai[i]);

  for (auto& plan : plans) {
    const auto m = plan.members.size();
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<std::size_t> mates;
      Anchor a;
      a.index = i;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == i) continue;
        a.candidates.push_back(j);
        if (labels[plan.members[j]] == labels[plan.members[i]]) mates.push_back(j);
      }
      std::uniform_int_distribution<std::size_t> pick(0, mates.size() - 1);
      a.positive = mates[pick(rng)];
      plan.anchors.push_back(std::move(a));
    }
  }
  return plans;
}

std::vector<ContrastiveBatch> build_contrastive_batches(std::span<const LabeledEmbedding> samples,
                                                        std::size_t batch_size, std::uint64_t seed,
                                                        double temperature) {
  std::vector<Label> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.label);
  std::vector<ContrastiveBatch> out;
  for (auto& plan : plan_contrastive_batches(labels, batch_size, seed)) {
    ContrastiveBatch b;
    b.temperature = temperature;
    for (auto idx : plan.members) {
      b.embeddings.push_back(samples[idx].embedding);
      b.labels.push_back(samples[idx].label);
    }
    b.anchors = std::move(plan.anchors);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace detectlab::losses
