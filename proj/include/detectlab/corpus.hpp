#ifndef DETECTLAB_CORPUS_HPP
#define DETECTLAB_CORPUS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace detectlab {

// Positive class is AI throughout the toolkit.
enum class Label { Human = 0, Ai = 1 };

std::string_view to_string(Label label);
// Case-insensitive "human" / "ai". Throws ValidationError otherwise.
Label parse_label(std::string_view s);

struct TextRecord {
  std::string text;
  Label label = Label::Human;
  std::string generator;
  std::string domain;
  std::string record_id;

  bool operator==(const TextRecord&) const = default;
};

// Checks the record invariants: non-blank text, human records carry generator "human".
void validate(const TextRecord& record);

class Corpus {
 public:
  Corpus() = default;
  // Validates every record and the uniqueness of record ids.
  Corpus(std::string name, std::vector<TextRecord> records);

  const std::string& name() const { return name_; }
  const std::vector<TextRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const TextRecord& operator[](std::size_t i) const { return records_[i]; }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  std::size_t count(Label label) const;
  // Records matching a predicate, in order, under a new name.
  template <typename Pred>
  Corpus filter(std::string name, Pred pred) const {
    std::vector<TextRecord> kept;
    for (const auto& r : records_) {
      if (pred(r)) kept.push_back(r);
    }
    return Corpus(std::move(name), std::move(kept));
  }

  bool operator==(const Corpus&) const = default;

 private:
  std::string name_;
  std::vector<TextRecord> records_;
};

Corpus load_jsonl(const std::filesystem::path& path);
// Parses JSONL content; `source` names the origin for default record ids.
Corpus parse_jsonl(std::string_view content, std::string_view source);
void save_jsonl(const Corpus& corpus, const std::filesystem::path& path);
std::string to_jsonl(const Corpus& corpus);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct CorpusSplit {
  Corpus train;
  Corpus val;
  Corpus test;
};

// Stratified jointly on (label, generator). Each output keeps input order.
CorpusSplit stratified_split(const Corpus& corpus, SplitFractions fractions, std::uint64_t seed);

// Keeps at most `max_per_stratum` records per (label, generator), sampled by seed.
Corpus cap_per_stratum(const Corpus& corpus, std::size_t max_per_stratum, std::uint64_t seed);

struct CorpusStats {
  double char_diversity = 0.0;
  double digit_density = 0.0;
  double mean_length = 0.0;
};

// Per-text code-point statistics, averaged uniformly over records.
CorpusStats corpus_stats(const Corpus& corpus);

}  // namespace detectlab

#endif  // DETECTLAB_CORPUS_HPP
