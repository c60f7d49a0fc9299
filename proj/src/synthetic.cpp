#include "detectlab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "detectlab/errors.hpp"

namespace detectlab {

void SyntheticConfig::validate() const {
  if (train_per_source < 3 || test_per_source < 1 || unseen_per_source < 1) {
    throw ConfigError("synthetic sizes must be >= 3 (train) and >= 1 (test, unseen)");
  }
  if (vocab_per_source < 8) throw ConfigError("vocab_per_source must be >= 8");
  if (!(overlap >= 0.0 && overlap <= 1.0)) throw ConfigError("overlap must lie in [0, 1]");
  if (min_words < 3 || max_words < min_words) throw ConfigError("need 3 <= min_words <= max_words");
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

const std::vector<std::string> kBaseOnsets = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v"};
const std::vector<std::string> kBaseVowels = {"a", "e", "i", "o", "u"};
// Shifted alphabet: extra ASCII letters plus accented vowels.
const std::vector<std::string> kShiftOnsets = {"c", "h", "j", "q", "w", "x", "z", "ch", "sh", "th", "zh", "b", "k"};
const std::vector<std::string> kShiftVowels = {"a", "y", "é", "ø", "ü", "å", "ï", "o"};

class WordMaker {
 public:
  explicit WordMaker(std::uint64_t seed) : rng_(seed) {}

  std::vector<std::string> make(std::size_t n, bool shifted) {
    const auto& on = shifted ? kShiftOnsets : kBaseOnsets;
    const auto& vo = shifted ? kShiftVowels : kBaseVowels;
    std::vector<std::string> out;
    while (out.size() < n) {
      const int syllables = std::uniform_int_distribution<int>(shifted ? 2 : 1, 3)(rng_);
      std::string w;
      for (int s = 0; s < syllables; ++s) {
        w += on[std::uniform_int_distribution<std::size_t>(0, on.size() - 1)(rng_)];
        w += vo[std::uniform_int_distribution<std::size_t>(0, vo.size() - 1)(rng_)];
      }
      if (used_.insert(w).second) out.push_back(w);
    }
    return out;
  }

 private:
  std::mt19937_64 rng_;
  std::set<std::string> used_;
};

std::vector<std::string> take(const std::vector<std::string>& from, std::size_t n, std::mt19937_64& rng) {
  auto copy = from;
  std::shuffle(copy.begin(), copy.end(), rng);
  copy.resize(std::min(n, copy.size()));
  return copy;
}

struct Source {
  std::string generator;
  Label label;
  std::vector<std::string> vocab;
  std::uint64_t seed;
  double comma_rate;
  int sentence_min, sentence_max;
  double digit_rate = 0.0;
  double length_scale = 1.0;
  // Successors per context and the decay of their weights (1/r^sharpness).
  // Generators are sharper than humans, as real LMs are lower-entropy writers.
  int branch = 6;
  double sharpness = 1.0;
};

// Order-3 process: the successor set of (w1, w2) is a fixed hash-seeded draw of
// `branch` vocabulary entries with Zipf-like weights.
class WordProcess {
 public:
  explicit WordProcess(const Source& s) : src_(s) {
    std::vector<double> w;
    for (int r = 1; r <= s.branch; ++r) w.push_back(std::pow(static_cast<double>(r), -s.sharpness));
    weights_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }

  std::size_t next(std::size_t w1, std::size_t w2, std::mt19937_64& rng) const {
    std::mt19937_64 table(mix(src_.seed ^ mix(w1 * 1000003ULL + w2)));
    std::uniform_int_distribution<std::size_t> pick(0, src_.vocab.size() - 1);
    std::vector<std::size_t> succ(static_cast<std::size_t>(src_.branch));
    for (auto& s : succ) s = pick(table);
    auto w = weights_;
    return succ[w(rng)];
  }

  std::string text(const SyntheticConfig& cfg, std::mt19937_64& rng) const {
    const int base = std::uniform_int_distribution<int>(cfg.min_words, cfg.max_words)(rng);
    const int words = static_cast<int>(std::lround(base * src_.length_scale));
    std::uniform_int_distribution<std::size_t> any(0, src_.vocab.size() - 1);
    std::uniform_int_distribution<int> sentence(src_.sentence_min, src_.sentence_max);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::size_t w1 = any(rng), w2 = any(rng);
    std::string out;
    int left_in_sentence = sentence(rng);
    bool capital = true;
    for (int i = 0; i < words; ++i) {
      const std::size_t w = i == 0 ? w1 : i == 1 ? w2 : next(w1, w2, rng);
      if (i >= 2) {
        w1 = w2;
        w2 = w;
      }
      std::string word;
      if (src_.digit_rate > 0 && coin(rng) < src_.digit_rate) {
        word = std::to_string(std::uniform_int_distribution<int>(0, 9999)(rng));
      } else {
        word = src_.vocab[w];
      }
      if (capital && word[0] >= 'a' && word[0] <= 'z') word[0] = static_cast<char>(word[0] - 'a' + 'A');
      capital = false;
      if (!out.empty()) out += ' ';
      out += word;
      if (--left_in_sentence == 0 || i + 1 == words) {
        out += '.';
        left_in_sentence = sentence(rng);
        capital = true;
      } else if (coin(rng) < src_.comma_rate) {
        out += ',';
      }
    }
    return out;
  }

 private:
  const Source& src_;
  std::discrete_distribution<std::size_t> weights_;
};

void emit(std::vector<TextRecord>& into, const Source& s, const std::string& split, const std::string& domain,
          std::size_t n, const SyntheticConfig& cfg, std::mt19937_64& rng) {
  const WordProcess p(s);
  for (std::size_t i = 0; i < n; ++i) {
    into.push_back({p.text(cfg, rng), s.label, s.generator, domain, split + "-" + s.generator + "-" + std::to_string(i)});
  }
}

}  // namespace

SyntheticBundle make_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(mix(cfg.seed));
  WordMaker words(mix(cfg.seed + 1));
  const std::size_t v = cfg.vocab_per_source;
  const auto shared_n = static_cast<std::size_t>(std::lround(cfg.overlap * static_cast<double>(v)));
  const auto shared = words.make(std::max<std::size_t>(shared_n, 1) * 2, false);

  auto base_vocab = [&] {
    auto vocab = words.make(v - shared_n, false);
    auto s = take(shared, shared_n, rng);
    vocab.insert(vocab.end(), s.begin(), s.end());
    return vocab;
  };
  auto blend = [&](std::vector<std::pair<const std::vector<std::string>*, double>> parts, bool shifted_own) {
    std::vector<std::string> vocab;
    double used = 0.0;
    for (auto [from, frac] : parts) {
      auto s = take(*from, static_cast<std::size_t>(std::lround(frac * static_cast<double>(v))), rng);
      vocab.insert(vocab.end(), s.begin(), s.end());
      used += frac;
    }
    auto own = words.make(static_cast<std::size_t>(std::lround((1.0 - used) * static_cast<double>(v))), shifted_own);
    vocab.insert(vocab.end(), own.begin(), own.end());
    return vocab;
  };

  auto seed_of = [&](int k) { return mix(cfg.seed * 31 + static_cast<std::uint64_t>(k)); };
  const Source human{"human", Label::Human, base_vocab(), seed_of(1), 0.12, 6, 14};
  Source gen_a{"gen-a", Label::Ai, base_vocab(), seed_of(2), 0.05, 10, 18};
  Source gen_b{"gen-b", Label::Ai, base_vocab(), seed_of(3), 0.08, 8, 16};
  for (auto* g : {&gen_a, &gen_b}) {
    g->branch = 3;
    g->sharpness = 2.0;
  }

  std::vector<std::string> ai_words = gen_a.vocab;
  ai_words.insert(ai_words.end(), gen_b.vocab.begin(), gen_b.vocab.end());
  Source human_ood{"human", Label::Human, blend({{&human.vocab, 0.15}, {&shared, 0.10}}, true), seed_of(4), 0.12, 6, 14};
  human_ood.digit_rate = 0.10;
  human_ood.length_scale = 1.6;
  Source gen_c{"gen-c", Label::Ai, blend({{&ai_words, 0.15}, {&shared, 0.10}}, true), seed_of(5), 0.06, 9, 17};
  gen_c.digit_rate = 0.15;
  gen_c.length_scale = 1.6;
  gen_c.branch = 3;
  gen_c.sharpness = 2.0;
  Source gen_d{"gen-d", Label::Ai, blend({{&human.vocab, 0.5}, {&shared, 0.2}}, false), seed_of(6), 0.10, 7, 15};
  gen_d.branch = 3;
  gen_d.sharpness = 2.0;

  std::vector<TextRecord> train, test_in, test_ood, unseen;
  for (const Source* s : {&human, static_cast<const Source*>(&gen_a), static_cast<const Source*>(&gen_b)}) {
    emit(train, *s, "train", "base", cfg.train_per_source, cfg, rng);
    emit(test_in, *s, "test", "base", cfg.test_per_source, cfg, rng);
  }
  emit(test_ood, human_ood, "ood", "shifted", cfg.test_per_source, cfg, rng);
  emit(test_ood, gen_c, "ood", "shifted", cfg.test_per_source, cfg, rng);
  emit(unseen, human, "unseen", "base", cfg.unseen_per_source, cfg, rng);
  emit(unseen, gen_d, "unseen", "base", cfg.unseen_per_source, cfg, rng);

  return {Corpus("train", std::move(train)), Corpus("test_in", std::move(test_in)),
          Corpus("test_ood", std::move(test_ood)), Corpus("unseen", std::move(unseen))};
}

void write_synthetic(const SyntheticBundle& b, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  save_jsonl(b.train, dir / "train.jsonl");
  save_jsonl(b.test_in, dir / "test_in.jsonl");
  save_jsonl(b.test_ood, dir / "test_ood.jsonl");
  save_jsonl(b.unseen, dir / "unseen.jsonl");
}

}  // namespace detectlab
