#ifndef DETECTLAB_TRAINING_FREE_HPP
#define DETECTLAB_TRAINING_FREE_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "detectlab/corpus.hpp"

namespace detectlab {

class Tokenizer;

// Next-token distribution over a fixed vocabulary.
class CausalLM {
 public:
  virtual ~CausalLM() = default;
  virtual int vocab_size() const = 0;
  // log p(. | prefix); one entry per vocabulary id.
  virtual std::vector<double> next_log_probs(std::span<const int> prefix) const = 0;
};

class UniformLM final : public CausalLM {
 public:
  explicit UniformLM(int vocab_size);
  int vocab_size() const override { return vocab_size_; }
  std::vector<double> next_log_probs(std::span<const int> prefix) const override;

 private:
  int vocab_size_;
};

// Context-free distribution.
class UnigramLM final : public CausalLM {
 public:
  explicit UnigramLM(std::vector<double> probs);
  int vocab_size() const override { return static_cast<int>(log_probs_.size()); }
  std::vector<double> next_log_probs(std::span<const int> prefix) const override;

 private:
  std::vector<double> log_probs_;
};

// Wraps a callable returning probabilities (not logs) for a prefix.
class FunctionLM final : public CausalLM {
 public:
  using Fn = std::function<std::vector<double>(std::span<const int>)>;
  FunctionLM(int vocab_size, Fn fn);
  int vocab_size() const override { return vocab_size_; }
  std::vector<double> next_log_probs(std::span<const int> prefix) const override;

 private:
  int vocab_size_;
  Fn fn_;
};

// Add-k smoothed n-gram model without backoff:
//   p(w | ctx) = (c(ctx, w) + k) / (c(ctx) + k V)
// Contexts shorter than order-1 are left-padded with a begin marker.
class NGramLM final : public CausalLM {
 public:
  NGramLM(int vocab_size, int order = 2, double k = 0.1);

  void fit(std::span<const std::vector<int>> sequences);
  static NGramLM fit(const Tokenizer& tokenizer, const Corpus& corpus, int order = 2, double k = 0.1);

  int vocab_size() const override { return vocab_size_; }
  int order() const { return order_; }
  double smoothing() const { return k_; }
  std::vector<double> next_log_probs(std::span<const int> prefix) const override;

 private:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::map<int, std::uint64_t> next;
  };
  std::vector<int> context_of(std::span<const int> prefix) const;

  int vocab_size_;
  int order_;
  double k_;
  std::map<std::vector<int>, ContextCounts> counts_;
};

struct TokenScore {
  int token = 0;
  double log_prob = 0.0;
  // Mean and variance of log p(v) under v ~ p(. | prefix).
  double mean = 0.0;
  double variance = 0.0;
};

std::vector<TokenScore> token_scores(const CausalLM& lm, std::span<const int> ids);

// exp(-(1/T) sum log p(x_t | x_<t)).
double perplexity(const CausalLM& lm, std::span<const int> ids);
double log_perplexity(const CausalLM& lm, std::span<const int> ids);

// Mean over positions of -sum_v p_performer(v) log p_observer(v).
double cross_perplexity(const CausalLM& observer, const CausalLM& performer, std::span<const int> ids);

enum class BinocularsMode {
  // log-ppl under observer / log-ppl under performer.
  LikelihoodRatio,
  // log-ppl under observer / cross_perplexity(observer, performer).
  CrossPerplexity,
};

// AI iff score < threshold. Throws ContractError on vocabulary mismatch and
// DegenerateError on a zero denominator.
double binoculars_score(const CausalLM& observer, const CausalLM& performer, std::span<const int> ids,
                        BinocularsMode mode = BinocularsMode::LikelihoodRatio);

// Analytic discrepancy (sum log p - sum mu) / sqrt(sum sigma^2); 0 when the
// summed variance is below 1e-18. AI iff score > threshold.
double sampling_discrepancy(const CausalLM& lm, std::span<const int> ids);
// Monte-Carlo estimate with `samples` per-position resamples drawn under the real prefix.
double sampling_discrepancy_mc(const CausalLM& lm, std::span<const int> ids, int samples, std::uint64_t seed);

enum class ScoreOrientation { AiIfGreater, AiIfLower };

Label threshold_verdict(double score, double threshold, ScoreOrientation orientation);

// Picks a human calibration score as threshold so that the fraction of human
// scores on the AI side is strictly below target_fpr (zero when target_fpr is 0),
// taking the threshold closest to the human bulk among those.
double calibrate_threshold(std::span<const double> scores_human, std::span<const double> scores_ai,
                           double target_fpr, ScoreOrientation orientation);

}  // namespace detectlab

#endif  // DETECTLAB_TRAINING_FREE_HPP
