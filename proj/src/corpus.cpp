#include "detectlab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "detectlab/errors.hpp"
#include "detectlab/text.hpp"

namespace detectlab {

using nlohmann::json;

std::string_view to_string(Label label) { return label == Label::Ai ? "ai" : "human"; }

Label parse_label(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "human") return Label::Human;
  if (lower == "ai") return Label::Ai;
  throw ValidationError("unknown label '" + std::string(s) + "'");
}

void validate(const TextRecord& record) {
  if (!text::has_content(record.text)) {
    throw ValidationError("record '" + record.record_id + "' has empty text");
  }
  if (record.label == Label::Human && record.generator != "human") {
    throw ValidationError("human record '" + record.record_id + "' has generator '" +
                          record.generator + "'");
  }
}

Corpus::Corpus(std::string name, std::vector<TextRecord> records)
    : name_(std::move(name)), records_(std::move(records)) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records_) {
    validate(r);
    if (!seen.insert(r.record_id).second) {
      throw ValidationError("duplicate record id '" + r.record_id + "'");
    }
  }
}

std::size_t Corpus::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      records_.begin(), records_.end(), [label](const TextRecord& r) { return r.label == label; }));
}

Corpus parse_jsonl(std::string_view content, std::string_view source) {
  std::vector<TextRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    const auto nl = content.find('\n', pos);
    auto line = content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!text::has_content(line)) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(line_no, "expected a JSON object");
    if (!obj.contains("text") || !obj["text"].is_string()) {
      throw ParseError(line_no, "missing string field 'text'");
    }
    if (!obj.contains("label") || !obj["label"].is_string()) {
      throw ParseError(line_no, "missing string field 'label'");
    }
    auto opt_string = [&](const char* key) -> std::optional<std::string> {
      if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
      if (!obj[key].is_string()) throw ParseError(line_no, std::string("field '") + key + "' must be a string");
      return obj[key].get<std::string>();
    };

    TextRecord r;
    r.text = obj["text"].get<std::string>();
    try {
      r.label = parse_label(obj["label"].get<std::string>());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    r.generator = opt_string("generator").value_or(r.label == Label::Human ? "human" : "unknown");
    r.domain = opt_string("domain").value_or("unknown");
    r.record_id = opt_string("id").value_or(std::string(source) + ":" + std::to_string(line_no));
    if (!text::has_content(r.text)) {
      throw ValidationError("line " + std::to_string(line_no) + ": empty text");
    }
    records.push_back(std::move(r));
  }
  return Corpus(std::string(source), std::move(records));
}

Corpus load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_jsonl(buf.str(), path.filename().string());
}

std::string to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus) {
    json obj = {{"text", r.text},
                {"label", std::string(to_string(r.label))},
                {"generator", r.generator},
                {"domain", r.domain},
                {"id", r.record_id}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_jsonl(corpus);
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

using StratumKey = std::pair<Label, std::string>;

std::map<StratumKey, std::vector<std::size_t>> strata_of(const Corpus& corpus) {
  std::map<StratumKey, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    strata[{corpus[i].label, corpus[i].generator}].push_back(i);
  }
  return strata;
}

std::string stratum_name(const StratumKey& key) {
  return std::string(to_string(key.first)) + "/" + key.second;
}

Corpus gather(const Corpus& corpus, std::vector<std::size_t> idx, std::string name) {
  std::sort(idx.begin(), idx.end());
  std::vector<TextRecord> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(corpus[i]);
  return Corpus(std::move(name), std::move(out));
}

}  // namespace

CorpusSplit stratified_split(const Corpus& corpus, SplitFractions f, std::uint64_t seed) {
  if (!(f.train > 0 && f.val > 0 && f.test > 0)) {
    throw ValidationError("split fractions must all be > 0");
  }
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw ValidationError("split fractions must sum to 1");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train, val, test;
  for (auto& [key, members] : strata_of(corpus)) {
    const auto n = members.size();
    if (n < 3) {
      throw StratificationError("stratum " + stratum_name(key) + " has " + std::to_string(n) +
                                " records; at least 3 are required");
    }
    std::shuffle(members.begin(), members.end(), rng);
    auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f.val * n)));
    auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f.test * n)));
    while (n_val + n_test > n - 1) {
      if (n_val >= n_test) --n_val; else --n_test;
    }
    const auto n_train = n - n_val - n_test;
    train.insert(train.end(), members.begin(), members.begin() + n_train);
    val.insert(val.end(), members.begin() + n_train, members.begin() + n_train + n_val);
    test.insert(test.end(), members.begin() + n_train + n_val, members.end());
  }
  return {gather(corpus, std::move(train), corpus.name() + ":train"),
          gather(corpus, std::move(val), corpus.name() + ":val"),
          gather(corpus, std::move(test), corpus.name() + ":test")};
}

Corpus cap_per_stratum(const Corpus& corpus, std::size_t max_per_stratum, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> kept;
  for (auto& [key, members] : strata_of(corpus)) {
    if (members.size() > max_per_stratum) {
      std::shuffle(members.begin(), members.end(), rng);
      members.resize(max_per_stratum);
    }
    kept.insert(kept.end(), members.begin(), members.end());
  }
  return gather(corpus, std::move(kept), corpus.name());
}

CorpusStats corpus_stats(const Corpus& corpus) {
  if (corpus.empty()) throw EmptyInputError("corpus_stats on an empty corpus");
  CorpusStats s;
  for (const auto& r : corpus) {
    const auto cps = text::decode_utf8(r.text);
    const std::set<char32_t> distinct(cps.begin(), cps.end());
    const auto digits = std::count_if(cps.begin(), cps.end(), text::is_digit);
    s.char_diversity += static_cast<double>(distinct.size());
    s.digit_density += static_cast<double>(digits) / static_cast<double>(cps.size());
    s.mean_length += static_cast<double>(cps.size());
  }
  const auto n = static_cast<double>(corpus.size());
  s.char_diversity /= n;
  s.digit_density /= n;
  s.mean_length /= n;
  return s;
}

}  // namespace detectlab
