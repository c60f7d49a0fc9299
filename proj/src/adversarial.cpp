#include "detectlab/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "detectlab/errors.hpp"
#include "detectlab/gan.hpp"
#include "detectlab/scl.hpp"
#include "detectlab/supervised.hpp"
#include "detectlab/text.hpp"

namespace detectlab {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

std::span<const int> truncated(std::span<const int> ids, int max_len) {
  return ids.size() > static_cast<std::size_t>(max_len) ? ids.first(static_cast<std::size_t>(max_len)) : ids;
}

// Pads a gradient over the kept prefix with zero rows for truncated positions.
ad::Matrix pad_rows(ad::Matrix g, std::size_t full_rows) {
  if (static_cast<std::size_t>(g.rows()) == full_rows) return g;
  ad::Matrix out = ad::Matrix::Zero(static_cast<Eigen::Index>(full_rows), g.cols());
  out.topRows(g.rows()) = g;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

VictimEval Victim::evaluate(std::span<const int> ids) const {
  return {ai_score(ids), attack_loss(ids), classify(ids)};
}

ad::Matrix Victim::attack_gradient(std::span<const int>) const {
  throw ContractError("victim does not expose input gradients");
}

std::vector<int> Victim::suffix_vocabulary() const {
  std::vector<int> ids;
  for (int v = 0; v < tokenizer().vocab_size(); ++v) {
    if (v != tokenizer().unk_id()) ids.push_back(v);
  }
  return ids;
}

LinearBagVictim::LinearBagVictim(Tokenizer tokenizer, std::vector<double> weights, double bias)
    : tokenizer_(std::move(tokenizer)), weights_(std::move(weights)), bias_(bias) {
  if (static_cast<int>(weights_.size()) != tokenizer_.vocab_size()) {
    throw ContractError("one weight per vocabulary id is required");
  }
}

double LinearBagVictim::logit(std::span<const int> ids) const {
  double s = bias_;
  for (int id : truncated(ids, tokenizer_.max_len())) s += weights_.at(static_cast<std::size_t>(id));
  return s;
}

double LinearBagVictim::ai_score(std::span<const int> ids) const { return sigmoid(logit(ids)); }

Label LinearBagVictim::classify(std::span<const int> ids) const {
  return logit(ids) >= 0.0 ? Label::Ai : Label::Human;
}

double LinearBagVictim::attack_loss(std::span<const int> ids) const { return softplus(logit(ids)); }

ad::Matrix LinearBagVictim::attack_gradient(std::span<const int> ids) const {
  const double dl_ds = sigmoid(logit(ids));
  const auto kept = truncated(ids, tokenizer_.max_len()).size();
  ad::Matrix g = ad::Matrix::Zero(static_cast<Eigen::Index>(ids.size()), tokenizer_.vocab_size());
  const Eigen::Map<const ad::RowVector> w(weights_.data(), static_cast<Eigen::Index>(weights_.size()));
  for (std::size_t t = 0; t < kept; ++t) g.row(static_cast<Eigen::Index>(t)) = dl_ds * w;
  return g;
}

// ---------------------------------------------------------------------------

const Tokenizer& SupervisedVictim::tokenizer() const { return detector_.tokenizer; }

VictimEval SupervisedVictim::evaluate(std::span<const int> ids) const {
  ad::Tape tape;
  const double s = detector_.head.forward(tape, detector_.encoder.forward(tape, ids)).value()(0, 0);
  const double p = sigmoid(s);
  return {p, softplus(s), decide(p, detector_.threshold)};
}

double SupervisedVictim::ai_score(std::span<const int> ids) const { return evaluate(ids).score; }
Label SupervisedVictim::classify(std::span<const int> ids) const { return evaluate(ids).verdict; }
double SupervisedVictim::attack_loss(std::span<const int> ids) const { return evaluate(ids).loss; }

ad::Matrix SupervisedVictim::attack_gradient(std::span<const int> ids) const {
  const auto kept = truncated(ids, detector_.encoder.spec().max_len);
  LossHook hook{[](const ad::Vector& s) { return softplus(s(0)); },
                [](const ad::Vector& s) { return ad::Vector::Constant(1, sigmoid(s(0))); }};
  auto g = grad_wrt_input(
      detector_.encoder.token_embedding(), kept,
      [this](ad::Tape& tape, ad::Var x) { return detector_.head.forward(tape, detector_.encoder.forward_embedded(tape, x)); },
      hook);
  return pad_rows(std::move(g.onehot), ids.size());
}

// ---------------------------------------------------------------------------

const Tokenizer& CentroidVictim::tokenizer() const { return model_.tokenizer; }

VictimEval CentroidVictim::evaluate(std::span<const int> ids) const {
  const auto d = centroid_classify(centroids_, model_.embed_ids(ids));
  return {d.margin, d.margin, d.label};
}

double CentroidVictim::ai_score(std::span<const int> ids) const { return evaluate(ids).score; }
Label CentroidVictim::classify(std::span<const int> ids) const { return evaluate(ids).verdict; }
double CentroidVictim::attack_loss(std::span<const int> ids) const { return evaluate(ids).loss; }

ad::Matrix CentroidVictim::attack_gradient(std::span<const int> ids) const {
  const auto kept = truncated(ids, model_.encoder.spec().max_len);
  const ad::Vector c_ai = centroids_.ai / centroids_.ai.norm();
  const ad::Vector c_h = centroids_.human / centroids_.human.norm();
  // The projected embedding is unit norm, so the margin is linear in it.
  LossHook hook{[c_ai, c_h](const ad::Vector& z) { return z.dot(c_ai) - z.dot(c_h); },
                [c_ai, c_h](const ad::Vector&) { return ad::Vector(c_ai - c_h); }};
  auto g = grad_wrt_input(
      model_.encoder.token_embedding(), kept,
      [this](ad::Tape& tape, ad::Var x) { return model_.head.forward(tape, model_.encoder.forward_embedded(tape, x)); },
      hook);
  return pad_rows(std::move(g.onehot), ids.size());
}

// ---------------------------------------------------------------------------

const Tokenizer& GanVictim::tokenizer() const { return detector_.tokenizer; }

VictimEval GanVictim::evaluate(std::span<const int> ids) const {
  const auto logits = detector_.discriminator.logits(detector_.encoder.encode(ids));
  const double gap = logits(static_cast<int>(GanClass::Ai)) - logits(static_cast<int>(GanClass::Human));
  return {gan_ai_probability(logits), softplus(gap), gan_verdict(logits)};
}

double GanVictim::ai_score(std::span<const int> ids) const { return evaluate(ids).score; }
Label GanVictim::classify(std::span<const int> ids) const { return evaluate(ids).verdict; }
double GanVictim::attack_loss(std::span<const int> ids) const { return evaluate(ids).loss; }

ad::Matrix GanVictim::attack_gradient(std::span<const int> ids) const {
  const auto kept = truncated(ids, detector_.encoder.spec().max_len);
  const int h = static_cast<int>(GanClass::Human), a = static_cast<int>(GanClass::Ai);
  LossHook hook{[=](const ad::Vector& l) { return softplus(l(a) - l(h)); },
                [=](const ad::Vector& l) {
                  ad::Vector g = ad::Vector::Zero(l.size());
                  const double s = sigmoid(l(a) - l(h));
                  g(a) = s;
                  g(h) = -s;
                  return g;
                }};
  auto g = grad_wrt_input(
      detector_.encoder.token_embedding(), kept,
      [this](ad::Tape& tape, ad::Var x) {
        return detector_.discriminator.forward(tape, detector_.encoder.forward_embedded(tape, x));
      },
      hook);
  return pad_rows(std::move(g.onehot), ids.size());
}

// ---------------------------------------------------------------------------

void AttackConfig::validate() const {
  if (suffix_len < 0) throw ValidationError("suffix_len must be >= 0");
  if (steps < 0) throw ValidationError("steps must be >= 0");
  if (top_k < 1) throw ValidationError("top_k must be >= 1");
  if (batch_eval < 1) throw ValidationError("batch_eval must be >= 1");
}

namespace {

struct Candidate {
  int position;
  int token;
};

int initial_token(const Victim& victim, const AttackConfig& cfg, const std::vector<int>& vocab) {
  if (vocab.empty()) throw ContractError("victim has an empty suffix vocabulary");
  if (auto id = victim.tokenizer().find(cfg.init_token); id && *id != victim.tokenizer().unk_id()) return *id;
  return vocab.front();
}

// For each suffix position, the top_k tokens with the most negative gradient,
// then either every (position, token) pair or batch_eval of them sampled
// without replacement.
std::vector<Candidate> propose(const ad::Matrix& suffix_grad, const std::vector<int>& vocab,
                               const AttackConfig& cfg, std::mt19937_64& rng) {
  std::vector<Candidate> pairs;
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), vocab.size());
  for (Eigen::Index pos = 0; pos < suffix_grad.rows(); ++pos) {
    std::vector<int> order = vocab;
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), [&](int x, int y) {
      const double gx = suffix_grad(pos, x), gy = suffix_grad(pos, y);
      return gx < gy || (gx == gy && x < y);
    });
    for (std::size_t i = 0; i < k; ++i) pairs.push_back({static_cast<int>(pos), order[i]});
  }
  if (pairs.size() > static_cast<std::size_t>(cfg.batch_eval)) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    pairs.resize(static_cast<std::size_t>(cfg.batch_eval));
  }
  return pairs;
}

std::string with_suffix(std::string_view text, const Tokenizer& tok, const std::vector<int>& suffix) {
  std::string out(text);
  if (!suffix.empty()) out += ' ' + tok.detokenize(suffix);
  return out;
}

std::vector<int> concat(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

GcgResult gcg_per_sample(const Victim& victim, std::string_view text, const AttackConfig& cfg) {
  cfg.validate();
  if (!victim.has_gradient()) throw ContractError("GCG requires a victim that exposes input gradients");
  const auto base = victim.ids_of(text);
  const auto before = victim.evaluate(base);
  if (before.verdict != Label::Ai) throw ContractError("GCG target must be classified AI by the victim");

  GcgResult result;
  result.score_before = before.score;
  if (cfg.suffix_len == 0) {
    result.perturbed_text = std::string(text);
    result.score_after = before.score;
    result.flipped = false;
    result.loss_trace.push_back(before.loss);
    return result;
  }

  const auto vocab = victim.suffix_vocabulary();
  std::vector<int> suffix(static_cast<std::size_t>(cfg.suffix_len), initial_token(victim, cfg, vocab));
  auto current = victim.evaluate(concat(base, suffix));
  result.loss_trace.push_back(current.loss);
  std::mt19937_64 rng(cfg.seed);

  for (int step = 0; step < cfg.steps; ++step) {
    if (cfg.early_stop && current.verdict == Label::Human) break;
    const auto ids = concat(base, suffix);
    const ad::Matrix grad = victim.attack_gradient(ids).bottomRows(cfg.suffix_len);
    const auto pairs = propose(grad, vocab, cfg, rng);

    std::optional<Candidate> best;
    VictimEval best_eval = current;
    for (const auto& c : pairs) {
      if (suffix[static_cast<std::size_t>(c.position)] == c.token) continue;
      auto trial = suffix;
      trial[static_cast<std::size_t>(c.position)] = c.token;
      const auto e = victim.evaluate(concat(base, trial));
      if (e.loss < best_eval.loss) {
        best = c;
        best_eval = e;
      }
    }
    ++result.steps_run;
    if (best) {
      suffix[static_cast<std::size_t>(best->position)] = best->token;
      current = best_eval;
    }
    result.loss_trace.push_back(current.loss);
    const bool exhaustive = pairs.size() < static_cast<std::size_t>(cfg.batch_eval) ||
                            pairs.size() == static_cast<std::size_t>(cfg.suffix_len) *
                                                std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), vocab.size());
    if (!best && exhaustive) break;  // local optimum over the full candidate set
  }

  result.suffix = suffix;
  result.perturbed_text = with_suffix(text, victim.tokenizer(), suffix);
  result.score_after = current.score;
  result.flipped = current.verdict == Label::Human;
  return result;
}

UniversalResult gcg_universal(const Victim& victim, std::span<const std::string> texts, const AttackConfig& cfg) {
  cfg.validate();
  if (texts.empty()) throw ValidationError("universal attack needs at least one text");
  if (!victim.has_gradient()) throw ContractError("GCG requires a victim that exposes input gradients");

  std::vector<std::vector<int>> bases;
  std::vector<VictimEval> before;
  for (const auto& t : texts) {
    bases.push_back(victim.ids_of(t));
    before.push_back(victim.evaluate(bases.back()));
    if (before.back().verdict != Label::Ai) throw ContractError("universal attack texts must be classified AI");
  }

  struct Objective {
    std::size_t flips = 0;
    double loss = 0.0;
    std::vector<VictimEval> evals;
    bool better_than(const Objective& o) const { return flips > o.flips || (flips == o.flips && loss < o.loss); }
  };
  auto score = [&](const std::vector<int>& suffix) {
    Objective o;
    for (const auto& b : bases) {
      o.evals.push_back(victim.evaluate(concat(b, suffix)));
      o.loss += o.evals.back().loss;
      if (o.evals.back().verdict == Label::Human) ++o.flips;
    }
    return o;
  };

  UniversalResult result;
  std::vector<int> suffix;
  Objective current;
  if (cfg.suffix_len == 0) {
    current = score(suffix);
  } else {
    const auto vocab = victim.suffix_vocabulary();
    suffix.assign(static_cast<std::size_t>(cfg.suffix_len), initial_token(victim, cfg, vocab));
    current = score(suffix);
    std::mt19937_64 rng(cfg.seed);
    for (int step = 0; step < cfg.steps; ++step) {
      if (cfg.early_stop && current.flips == bases.size()) break;
      ad::Matrix grad = ad::Matrix::Zero(cfg.suffix_len, victim.tokenizer().vocab_size());
      for (const auto& b : bases) grad += victim.attack_gradient(concat(b, suffix)).bottomRows(cfg.suffix_len);
      const auto pairs = propose(grad, vocab, cfg, rng);

      std::optional<Candidate> best;
      Objective best_obj = current;
      for (const auto& c : pairs) {
        if (suffix[static_cast<std::size_t>(c.position)] == c.token) continue;
        auto trial = suffix;
        trial[static_cast<std::size_t>(c.position)] = c.token;
        auto o = score(trial);
        if (o.better_than(best_obj)) {
          best = c;
          best_obj = std::move(o);
        }
      }
      ++result.steps_run;
      if (best) {
        suffix[static_cast<std::size_t>(best->position)] = best->token;
        current = std::move(best_obj);
      }
      const bool exhaustive = pairs.size() < static_cast<std::size_t>(cfg.batch_eval) ||
                              pairs.size() == static_cast<std::size_t>(cfg.suffix_len) *
                                                  std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), vocab.size());
      if (!best && exhaustive) break;
    }
  }

  result.trigger = suffix;
  result.trigger_text = victim.tokenizer().detokenize(suffix);
  for (std::size_t i = 0; i < bases.size(); ++i) {
    GcgResult r;
    r.suffix = suffix;
    r.perturbed_text = with_suffix(texts[i], victim.tokenizer(), suffix);
    r.score_before = before[i].score;
    r.score_after = current.evals[i].score;
    r.flipped = current.evals[i].verdict == Label::Human;
    r.steps_run = result.steps_run;
    r.loss_trace.push_back(current.evals[i].loss);
    result.per_sample.push_back(std::move(r));
  }
  result.success_rate = static_cast<double>(current.flips) / static_cast<double>(bases.size());
  return result;
}

int best_single_token_suffix(const Victim& victim, std::string_view text) {
  const auto base = victim.ids_of(text);
  int best = -1;
  double best_loss = 0.0;
  for (int v : victim.suffix_vocabulary()) {
    auto ids = base;
    ids.push_back(v);
    const double l = victim.attack_loss(ids);
    if (best < 0 || l < best_loss) {
      best = v;
      best_loss = l;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

std::string quote_attribute(std::string_view text, int style) {
  static constexpr const char* kAttributions[kQuoteStyles] = {
      " — user comment, forum thread",
      " — quoted in a community newsletter",
      " — attributed to an anonymous reader",
  };
  if (!text::has_content(text)) throw ValidationError("cannot perturb empty text");
  if (style < 0 || style >= kQuoteStyles) throw ValidationError("unknown attribution style");
  return "“" + std::string(text) + "”" + kAttributions[style];
}

std::string typo_noise(std::string_view text, double rate, std::uint64_t seed, TypoOps ops) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ValidationError("typo rate must lie in [0, 1]");
  if (!text::has_content(text)) throw ValidationError("cannot perturb empty text");
  enum Op { Swap, Remove, Duplicate };
  std::vector<Op> enabled;
  if (ops.swap) enabled.push_back(Swap);
  if (ops.remove) enabled.push_back(Remove);
  if (ops.duplicate) enabled.push_back(Duplicate);
  if (enabled.empty() || rate == 0.0) return std::string(text);

  const auto cps = text::decode_utf8(text);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, enabled.size() - 1);
  std::u32string out;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (text::is_space(c) || coin(rng) >= rate) {
      out.push_back(c);
      continue;
    }
    switch (enabled[pick(rng)]) {
      case Swap:
        if (i + 1 < cps.size() && !text::is_space(cps[i + 1])) {
          out.push_back(cps[i + 1]);
          out.push_back(c);
          ++i;
        } else {
          out.push_back(c);
        }
        break;
      case Remove:
        break;
      case Duplicate:
        out.push_back(c);
        out.push_back(c);
        break;
    }
  }
  return text::encode_utf8(out);
}

// ---------------------------------------------------------------------------

std::vector<AttackReport> run_attack_suite(const Victim& victim, const Corpus& corpus, const SuiteConfig& cfg) {
  cfg.attack.validate();
  std::vector<const TextRecord*> cohort;
  for (const auto& r : corpus) {
    if (r.label != Label::Ai) continue;
    if (victim.classify(victim.ids_of(r.text)) != Label::Ai) continue;
    cohort.push_back(&r);
    if (cfg.max_samples && cohort.size() == cfg.max_samples) break;
  }
  if (cohort.empty()) throw EmptyInputError("no AI records are classified AI by the victim; empty attack cohort");

  auto finish = [&](AttackReport& rep) {
    rep.cohort_size = cohort.size();
    rep.successes = static_cast<std::size_t>(
        std::count_if(rep.transcripts.begin(), rep.transcripts.end(), [](const auto& t) { return t.flipped; }));
    rep.success_rate = static_cast<double>(rep.successes) / static_cast<double>(rep.cohort_size);
  };

  std::vector<AttackReport> reports(4);
  reports[0].attack = "GCG (per-sample)";
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    auto acfg = cfg.attack;
    acfg.seed = cfg.attack.seed + i;
    const auto r = gcg_per_sample(victim, cohort[i]->text, acfg);
    reports[0].transcripts.push_back({cohort[i]->record_id, cohort[i]->text, r.perturbed_text, r.score_before,
                                      r.score_after, r.flipped, r.steps_run});
  }
  finish(reports[0]);

  reports[1].attack = "GCG (universal)";
  std::vector<std::string> texts;
  for (const auto* r : cohort) texts.push_back(r->text);
  const auto uni = gcg_universal(victim, texts, cfg.attack);
  reports[1].trigger = uni.trigger_text;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& r = uni.per_sample[i];
    reports[1].transcripts.push_back({cohort[i]->record_id, cohort[i]->text, r.perturbed_text, r.score_before,
                                      r.score_after, r.flipped, r.steps_run});
  }
  finish(reports[1]);

  reports[2].attack = "Quotation/Attribution";
  reports[3].attack = "Typographical Noise";
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& rec = *cohort[i];
    const auto before = victim.evaluate(victim.ids_of(rec.text));
    const std::string perturbed[2] = {quote_attribute(rec.text, cfg.quote_style),
                                      typo_noise(rec.text, cfg.typo_rate, cfg.attack.seed + i)};
    for (int a = 0; a < 2; ++a) {
      const auto after = victim.evaluate(victim.ids_of(perturbed[a]));
      reports[static_cast<std::size_t>(2 + a)].transcripts.push_back(
          {rec.record_id, rec.text, perturbed[a], before.score, after.score, after.verdict == Label::Human, 0});
    }
  }
  finish(reports[2]);
  finish(reports[3]);
  return reports;
}

std::string attack_table(std::span<const AttackReport> reports) {
  std::ostringstream out;
  out << std::left << std::setw(24) << "Attack / Perturbation" << std::right << std::setw(10) << "Success"
      << std::setw(8) << "Cohort" << '\n';
  for (const auto& r : reports) {
    char pct[32];
    std::snprintf(pct, sizeof(pct), "%.1f%%", r.success_rate * 100.0);
    out << std::left << std::setw(24) << r.attack << std::right << std::setw(10) << pct << std::setw(8)
        << r.cohort_size << '\n';
  }
  return out.str();
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

std::string attacks_json(std::span<const AttackReport> reports) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    arr.push_back({{"attack", r.attack},
                   {"success_rate", fixed(r.success_rate * 100.0, 2)},
                   {"successes", r.successes},
                   {"cohort_size", r.cohort_size},
                   {"trigger", r.trigger}});
  }
  return arr.dump(2) + "\n";
}

std::string transcripts_jsonl(std::span<const AttackReport> reports) {
  std::string out;
  for (const auto& r : reports) {
    for (const auto& t : r.transcripts) {
      nlohmann::ordered_json j = {{"attack", r.attack},         {"record_id", t.record_id},
                                  {"original", t.original},     {"perturbed", t.perturbed},
                                  {"score_before", fixed(t.score_before, 6)},
                                  {"score_after", fixed(t.score_after, 6)},
                                  {"flipped", t.flipped},       {"steps", t.steps}};
      out += j.dump() + "\n";
    }
  }
  return out;
}

}  // namespace detectlab
