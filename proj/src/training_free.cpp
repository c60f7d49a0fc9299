#include "detectlab/training_free.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "detectlab/encoder.hpp"
#include "detectlab/errors.hpp"

namespace detectlab {

UniformLM::UniformLM(int vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size < 1) throw ValidationError("vocab size must be >= 1");
}

std::vector<double> UniformLM::next_log_probs(std::span<const int>) const {
  return std::vector<double>(static_cast<std::size_t>(vocab_size_), -std::log(static_cast<double>(vocab_size_)));
}

UnigramLM::UnigramLM(std::vector<double> probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p > 0.0)) throw ValidationError("unigram probabilities must be > 0");
    sum += p;
  }
  if (probs.empty() || std::abs(sum - 1.0) > 1e-9) throw ValidationError("unigram probabilities must sum to 1");
  for (double p : probs) log_probs_.push_back(std::log(p));
}

std::vector<double> UnigramLM::next_log_probs(std::span<const int>) const { return log_probs_; }

FunctionLM::FunctionLM(int vocab_size, Fn fn) : vocab_size_(vocab_size), fn_(std::move(fn)) {}

std::vector<double> FunctionLM::next_log_probs(std::span<const int> prefix) const {
  auto p = fn_(prefix);
  if (static_cast<int>(p.size()) != vocab_size_) throw ContractError("distribution has the wrong length");
  for (auto& v : p) v = std::log(v);
  return p;
}

NGramLM::NGramLM(int vocab_size, int order, double k) : vocab_size_(vocab_size), order_(order), k_(k) {
  if (vocab_size < 1) throw ValidationError("vocab size must be >= 1");
  if (order < 1) throw ValidationError("n-gram order must be >= 1");
  if (!(k > 0.0)) throw ValidationError("add-k smoothing constant must be > 0");
}

std::vector<int> NGramLM::context_of(std::span<const int> prefix) const {
  const auto n = static_cast<std::size_t>(order_ - 1);
  std::vector<int> ctx(n, vocab_size_);  // vocab_size_ is the begin marker
  const auto take = std::min(n, prefix.size());
  std::copy(prefix.end() - static_cast<std::ptrdiff_t>(take), prefix.end(), ctx.end() - static_cast<std::ptrdiff_t>(take));
  return ctx;
}

void NGramLM::fit(std::span<const std::vector<int>> sequences) {
  for (const auto& seq : sequences) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      if (seq[t] < 0 || seq[t] >= vocab_size_) throw ValidationError("token id out of range");
      auto& c = counts_[context_of(std::span<const int>(seq).first(t))];
      ++c.total;
      ++c.next[seq[t]];
    }
  }
}

NGramLM NGramLM::fit(const Tokenizer& tokenizer, const Corpus& corpus, int order, double k) {
  NGramLM lm(tokenizer.vocab_size(), order, k);
  std::vector<std::vector<int>> seqs;
  seqs.reserve(corpus.size());
  for (const auto& r : corpus) seqs.push_back(tokenizer.tokenize(r.text));
  lm.fit(seqs);
  return lm;
}

std::vector<double> NGramLM::next_log_probs(std::span<const int> prefix) const {
  const double v = static_cast<double>(vocab_size_);
  auto it = counts_.find(context_of(prefix));
  if (it == counts_.end()) return std::vector<double>(static_cast<std::size_t>(vocab_size_), -std::log(v));
  const double denom = static_cast<double>(it->second.total) + k_ * v;
  std::vector<double> out(static_cast<std::size_t>(vocab_size_), std::log(k_ / denom));
  for (auto [w, c] : it->second.next) out[static_cast<std::size_t>(w)] = std::log((static_cast<double>(c) + k_) / denom);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_ids(const CausalLM& lm, std::span<const int> ids) {
  if (ids.empty()) throw ValidationError("empty token sequence");
  for (int id : ids) {
    if (id < 0 || id >= lm.vocab_size()) throw ValidationError("token id out of range for the language model");
  }
}

}  // namespace

std::vector<TokenScore> token_scores(const CausalLM& lm, std::span<const int> ids) {
  check_ids(lm, ids);
  std::vector<TokenScore> out;
  out.reserve(ids.size());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const auto lp = lm.next_log_probs(ids.first(t));
    double mean = 0.0, second = 0.0;
    for (double l : lp) {
      const double p = std::exp(l);
      mean += p * l;
      second += p * l * l;
    }
    out.push_back({ids[t], lp[static_cast<std::size_t>(ids[t])], mean, std::max(0.0, second - mean * mean)});
  }
  return out;
}

double log_perplexity(const CausalLM& lm, std::span<const int> ids) {
  check_ids(lm, ids);
  double sum = 0.0;
  for (std::size_t t = 0; t < ids.size(); ++t) sum += lm.next_log_probs(ids.first(t))[static_cast<std::size_t>(ids[t])];
  return -sum / static_cast<double>(ids.size());
}

double perplexity(const CausalLM& lm, std::span<const int> ids) { return std::exp(log_perplexity(lm, ids)); }

double cross_perplexity(const CausalLM& observer, const CausalLM& performer, std::span<const int> ids) {
  if (observer.vocab_size() != performer.vocab_size()) throw ContractError("observer and performer vocabularies differ");
  check_ids(observer, ids);
  double sum = 0.0;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const auto lo = observer.next_log_probs(ids.first(t));
    const auto lp = performer.next_log_probs(ids.first(t));
    for (std::size_t v = 0; v < lo.size(); ++v) sum -= std::exp(lp[v]) * lo[v];
  }
  return sum / static_cast<double>(ids.size());
}

double binoculars_score(const CausalLM& observer, const CausalLM& performer, std::span<const int> ids,
                        BinocularsMode mode) {
  if (observer.vocab_size() != performer.vocab_size()) throw ContractError("observer and performer vocabularies differ");
  const double numerator = log_perplexity(observer, ids);
  const double denominator = mode == BinocularsMode::LikelihoodRatio ? log_perplexity(performer, ids)
                                                                     : cross_perplexity(observer, performer, ids);
  if (!(std::abs(denominator) > 1e-300)) throw DegenerateError("binoculars denominator is zero");
  return numerator / denominator;
}

double sampling_discrepancy(const CausalLM& lm, std::span<const int> ids) {
  double ll = 0.0, mu = 0.0, var = 0.0;
  for (const auto& s : token_scores(lm, ids)) {
    ll += s.log_prob;
    mu += s.mean;
    var += s.variance;
  }
  if (var < 1e-18) return 0.0;
  return (ll - mu) / std::sqrt(var);
}

double sampling_discrepancy_mc(const CausalLM& lm, std::span<const int> ids, int samples, std::uint64_t seed) {
  check_ids(lm, ids);
  if (samples < 2) throw ValidationError("Monte-Carlo discrepancy needs at least 2 samples");
  std::mt19937_64 rng(seed);
  double ll = 0.0;
  std::vector<double> sampled(static_cast<std::size_t>(samples), 0.0);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const auto lp = lm.next_log_probs(ids.first(t));
    ll += lp[static_cast<std::size_t>(ids[t])];
    std::vector<double> probs(lp.size());
    for (std::size_t v = 0; v < lp.size(); ++v) probs[v] = std::exp(lp[v]);
    std::discrete_distribution<std::size_t> draw(probs.begin(), probs.end());
    for (auto& s : sampled) s += lp[draw(rng)];
  }
  double mean = 0.0;
  for (double s : sampled) mean += s;
  mean /= static_cast<double>(samples);
  double var = 0.0;
  for (double s : sampled) var += (s - mean) * (s - mean);
  var /= static_cast<double>(samples - 1);
  if (var < 1e-18) return 0.0;
  return (ll - mean) / std::sqrt(var);
}

Label threshold_verdict(double score, double threshold, ScoreOrientation orientation) {
  const bool ai = orientation == ScoreOrientation::AiIfGreater ? score > threshold : score < threshold;
  return ai ? Label::Ai : Label::Human;
}

double calibrate_threshold(std::span<const double> scores_human, std::span<const double> scores_ai,
                           double target_fpr, ScoreOrientation orientation) {
  if (scores_human.empty()) throw ValidationError("calibration needs human scores");
  if (scores_ai.empty()) throw ValidationError("calibration needs AI scores");
  if (!(target_fpr >= 0.0 && target_fpr < 1.0)) throw ValidationError("target_fpr must lie in [0, 1)");
  const double sign = orientation == ScoreOrientation::AiIfGreater ? 1.0 : -1.0;
  std::vector<double> h;
  for (double s : scores_human) h.push_back(sign * s);
  std::sort(h.begin(), h.end());
  const auto n = h.size();
  // Largest count m of humans allowed strictly above the threshold: m < target * n, or m = 0.
  std::size_t m = 0;
  while (m + 1 < n && static_cast<double>(m + 1) < target_fpr * static_cast<double>(n)) ++m;
  // Ties at the threshold never count as above, so the realized FPR can only be lower.
  return sign * h[n - 1 - m];
}

}  // namespace detectlab
