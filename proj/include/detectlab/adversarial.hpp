#ifndef DETECTLAB_ADVERSARIAL_HPP
#define DETECTLAB_ADVERSARIAL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detectlab/autograd.hpp"
#include "detectlab/corpus.hpp"
#include "detectlab/encoder.hpp"

namespace detectlab {

struct SupervisedDetector;
struct StyleModel;
struct CentroidPair;
struct GanDetector;

struct VictimEval {
  double score = 0.0;
  double loss = 0.0;
  Label verdict = Label::Human;
};

// A detector under attack. Inputs are full (untruncated) token id sequences;
// victims apply their own truncation.
class Victim {
 public:
  virtual ~Victim() = default;

  virtual const Tokenizer& tokenizer() const = 0;
  // Higher means more AI-like.
  virtual double ai_score(std::span<const int> ids) const = 0;
  virtual Label classify(std::span<const int> ids) const = 0;
  // The attacker minimizes this; lower means closer to a HUMAN verdict.
  virtual double attack_loss(std::span<const int> ids) const = 0;

  // Score, loss and verdict from a single forward pass where the victim supports it.
  virtual VictimEval evaluate(std::span<const int> ids) const;

  virtual bool has_gradient() const { return false; }
  // d attack_loss / d one-hot(ids), ids.size() x vocab_size. Positions the
  // victim truncates away get zero rows.
  virtual ad::Matrix attack_gradient(std::span<const int> ids) const;

  std::vector<int> ids_of(std::string_view text) const { return tokenizer().tokenize_full(text); }
  // Vocabulary minus the unknown token.
  std::vector<int> suffix_vocabulary() const;
};

// s = bias + sum_t w[x_t] over the first max_len tokens; AI iff s >= 0.
// Loss is -log(1 - sigmoid(s)).
class LinearBagVictim final : public Victim {
 public:
  LinearBagVictim(Tokenizer tokenizer, std::vector<double> weights, double bias);

  const Tokenizer& tokenizer() const override { return tokenizer_; }
  double ai_score(std::span<const int> ids) const override;
  Label classify(std::span<const int> ids) const override;
  double attack_loss(std::span<const int> ids) const override;
  bool has_gradient() const override { return true; }
  ad::Matrix attack_gradient(std::span<const int> ids) const override;

 private:
  double logit(std::span<const int> ids) const;
  Tokenizer tokenizer_;
  std::vector<double> weights_;
  double bias_;
};

// Encoder + sigmoid head. Loss -log(1 - p).
class SupervisedVictim final : public Victim {
 public:
  explicit SupervisedVictim(const SupervisedDetector& detector) : detector_(detector) {}

  const Tokenizer& tokenizer() const override;
  double ai_score(std::span<const int> ids) const override;
  Label classify(std::span<const int> ids) const override;
  double attack_loss(std::span<const int> ids) const override;
  VictimEval evaluate(std::span<const int> ids) const override;
  bool has_gradient() const override { return true; }
  ad::Matrix attack_gradient(std::span<const int> ids) const override;

 private:
  const SupervisedDetector& detector_;
};

// Style model + centroids. Score and loss are the centroid margin.
class CentroidVictim final : public Victim {
 public:
  CentroidVictim(const StyleModel& model, const CentroidPair& centroids) : model_(model), centroids_(centroids) {}

  const Tokenizer& tokenizer() const override;
  double ai_score(std::span<const int> ids) const override;
  Label classify(std::span<const int> ids) const override;
  double attack_loss(std::span<const int> ids) const override;
  VictimEval evaluate(std::span<const int> ids) const override;
  bool has_gradient() const override { return true; }
  ad::Matrix attack_gradient(std::span<const int> ids) const override;

 private:
  const StyleModel& model_;
  const CentroidPair& centroids_;
};

// Encoder + (k+1)-class discriminator. Loss -log P(HUMAN | task labels).
class GanVictim final : public Victim {
 public:
  explicit GanVictim(const GanDetector& detector) : detector_(detector) {}

  const Tokenizer& tokenizer() const override;
  double ai_score(std::span<const int> ids) const override;
  Label classify(std::span<const int> ids) const override;
  double attack_loss(std::span<const int> ids) const override;
  VictimEval evaluate(std::span<const int> ids) const override;
  bool has_gradient() const override { return true; }
  ad::Matrix attack_gradient(std::span<const int> ids) const override;

 private:
  const GanDetector& detector_;
};

struct AttackConfig {
  int suffix_len = 8;
  int steps = 200;
  int top_k = 16;
  int batch_eval = 64;
  std::uint64_t seed = 0;
  // Initial suffix token; falls back to the first suffix-vocabulary id when absent.
  std::string init_token = "!";
  bool early_stop = true;

  void validate() const;
};

struct GcgResult {
  std::string perturbed_text;
  std::vector<int> suffix;
  bool flipped = false;
  double score_before = 0.0;
  double score_after = 0.0;
  int steps_run = 0;
  // Attack loss after initialization and after each step.
  std::vector<double> loss_trace;
};

// Appends suffix_len tokens and greedily substitutes one suffix position per
// step among the top_k most-negative-gradient tokens. Throws ContractError if
// the victim has no gradient or does not classify the text as AI.
GcgResult gcg_per_sample(const Victim& victim, std::string_view text, const AttackConfig& cfg);

struct UniversalResult {
  std::vector<int> trigger;
  std::string trigger_text;
  double success_rate = 0.0;
  std::vector<GcgResult> per_sample;
  int steps_run = 0;
};

// One suffix shared across all texts, chosen to maximize the number of flips
// (ties broken by summed loss) using the summed suffix gradient.
UniversalResult gcg_universal(const Victim& victim, std::span<const std::string> texts, const AttackConfig& cfg);

// Exhaustive argmin of the attack loss over one appended suffix token.
int best_single_token_suffix(const Victim& victim, std::string_view text);

inline constexpr int kQuoteTemplateVersion = 1;
inline constexpr int kQuoteStyles = 3;
// “<text>” followed by a fixed attribution clause selected by style.
std::string quote_attribute(std::string_view text, int style = 0);

struct TypoOps {
  bool swap = true;
  bool remove = true;
  bool duplicate = true;
};

// Each non-whitespace code point is perturbed with probability `rate` by one
// enabled operation chosen uniformly. Adjacent swaps never cross whitespace.
std::string typo_noise(std::string_view text, double rate, std::uint64_t seed, TypoOps ops = {});

struct AttackTranscript {
  std::string record_id;
  std::string original;
  std::string perturbed;
  double score_before = 0.0;
  double score_after = 0.0;
  bool flipped = false;
  int steps = 0;
};

struct AttackReport {
  std::string attack;
  std::size_t cohort_size = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  std::string trigger;
  std::vector<AttackTranscript> transcripts;
};

struct SuiteConfig {
  AttackConfig attack;
  double typo_rate = 0.05;
  int quote_style = 0;
  // Cap on the cohort size; 0 keeps every eligible record.
  std::size_t max_samples = 0;
};

// Four rows: GCG (per-sample), GCG (universal), Quotation/Attribution,
// Typographical Noise. Success counts only the AI records the victim labels AI.
std::vector<AttackReport> run_attack_suite(const Victim& victim, const Corpus& corpus, const SuiteConfig& cfg);

std::string attack_table(std::span<const AttackReport> reports);
std::string attacks_json(std::span<const AttackReport> reports);
std::string transcripts_jsonl(std::span<const AttackReport> reports);

}  // namespace detectlab

#endif  // DETECTLAB_ADVERSARIAL_HPP
