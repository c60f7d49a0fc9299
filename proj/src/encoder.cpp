#include "detectlab/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <random>

#include "detectlab/corpus.hpp"
#include "detectlab/errors.hpp"
#include "detectlab/text.hpp"

namespace detectlab {

Tokenizer::Tokenizer(std::vector<std::string> tokens, int unk_id, int max_len)
    : tokens_(std::move(tokens)), unk_id_(unk_id), max_len_(max_len) {
  if (unk_id_ < 0 || unk_id_ >= static_cast<int>(tokens_.size())) {
    throw ValidationError("unk id out of vocabulary range");
  }
  if (max_len_ < 1) throw ValidationError("max_len must be >= 1");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

std::vector<std::string> Tokenizer::split(std::string_view s) {
  std::vector<std::string> pieces;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) pieces.push_back(std::move(current));
    current.clear();
  };
  for (char32_t cp : text::decode_utf8(s)) {
    if (text::is_space(cp)) {
      flush();
    } else if (text::is_punct(cp)) {
      flush();
      std::string p;
      text::append_utf8(p, cp);
      pieces.push_back(std::move(p));
    } else {
      if (cp >= U'A' && cp <= U'Z') cp = cp - U'A' + U'a';
      text::append_utf8(current, cp);
    }
  }
  flush();
  return pieces;
}

Tokenizer Tokenizer::build(std::span<const std::string> texts, int min_freq, int max_len) {
  std::map<std::string, std::size_t> freq;
  for (const auto& t : texts) {
    for (auto& p : split(t)) ++freq[p];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq) {
    if (n >= static_cast<std::size_t>(std::max(1, min_freq)) && tok != kUnkToken) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{std::string(kUnkToken)};
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Tokenizer(std::move(tokens), 0, max_len);
}

Tokenizer Tokenizer::build(const Corpus& corpus, int min_freq, int max_len) {
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& r : corpus) texts.push_back(r.text);
  return build(texts, min_freq, max_len);
}

std::vector<int> Tokenizer::tokenize_full(std::string_view s) const {
  auto pieces = split(s);
  if (pieces.empty()) throw ValidationError("cannot tokenize empty text");
  std::vector<int> ids;
  ids.reserve(pieces.size());
  for (const auto& p : pieces) {
    auto it = index_.find(p);
    ids.push_back(it == index_.end() ? unk_id_ : it->second);
  }
  return ids;
}

std::vector<int> Tokenizer::tokenize(std::string_view s) const {
  auto ids = tokenize_full(s);
  if (ids.size() > static_cast<std::size_t>(max_len_)) ids.resize(static_cast<std::size_t>(max_len_));
  return ids;
}

std::string Tokenizer::detokenize(std::span<const int> ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

std::optional<int> Tokenizer::find(std::string_view tok) const {
  auto it = index_.find(std::string(tok));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

namespace {

ad::Matrix uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  ad::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

void randomize(ad::Parameter& p, std::mt19937_64& rng) {
  p.value = uniform(p.value.rows(), p.value.cols(), rng);
}

}  // namespace

void EncoderModel::allocate(const EncoderSpec& spec) {
  if (spec.vocab_size < 1 || spec.hidden_dim < 1 || spec.layers < 0 || spec.ff_dim < 1 || spec.max_len < 1) {
    throw ValidationError("invalid encoder spec");
  }
  spec_ = spec;
  const auto d = spec.hidden_dim, f = spec.ff_dim;
  auto zero = [](const std::string& name, Eigen::Index r, Eigen::Index c) {
    return ad::Parameter(name, ad::Matrix::Zero(r, c));
  };
  token_embedding_ = zero("embed.token", spec.vocab_size, d);
  position_embedding_ = spec.positional ? zero("embed.position", spec.max_len, d) : ad::Parameter();
  blocks_.clear();
  for (int l = 0; l < spec.layers; ++l) {
    const auto p = "block" + std::to_string(l) + ".";
    blocks_.push_back(Block{zero(p + "wq", d, d), zero(p + "wk", d, d), zero(p + "wv", d, d),
                            zero(p + "wo", d, d), zero(p + "w1", d, f), zero(p + "b1", 1, f),
                            zero(p + "w2", f, d), zero(p + "b2", 1, d)});
  }
}

EncoderModel::EncoderModel(const EncoderSpec& spec, std::uint64_t seed) {
  allocate(spec);
  std::mt19937_64 rng(seed);
  randomize(token_embedding_, rng);
  if (spec.positional) randomize(position_embedding_, rng);
  for (auto& b : blocks_) {
    for (auto* p : {&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.w2}) randomize(*p, rng);
  }
}

EncoderModel EncoderModel::zeros(const EncoderSpec& spec) {
  EncoderModel m;
  m.allocate(spec);
  return m;
}

ad::Var EncoderModel::forward(ad::Tape& tape, std::span<const int> ids) const {
  if (ids.empty()) throw ValidationError("encode requires a non-empty id sequence");
  if (ids.size() > static_cast<std::size_t>(spec_.max_len)) ids = ids.first(static_cast<std::size_t>(spec_.max_len));
  auto x = tape.gather_rows(tape.param(token_embedding_), ids);
  return forward_embedded(tape, x);
}

ad::Var EncoderModel::forward_embedded(ad::Tape& tape, ad::Var x) const {
  const auto T = static_cast<int>(x.rows());
  if (T < 1 || T > spec_.max_len || x.cols() != spec_.hidden_dim) {
    throw ContractError("embedded input has the wrong shape");
  }
  if (spec_.positional) {
    std::vector<int> pos(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) pos[static_cast<std::size_t>(t)] = t;
    x = tape.add(x, tape.gather_rows(tape.param(position_embedding_), pos));
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(spec_.hidden_dim));
  for (const auto& b : blocks_) {
    auto q = tape.matmul(x, tape.param(b.wq));
    auto k = tape.matmul(x, tape.param(b.wk));
    auto v = tape.matmul(x, tape.param(b.wv));
    auto attn = tape.softmax_rows(tape.scale(tape.matmul_nt(q, k), inv_sqrt_d));
    x = tape.add(x, tape.matmul(tape.matmul(attn, v), tape.param(b.wo)));
    auto hidden = tape.tanh(tape.add_row(tape.matmul(x, tape.param(b.w1)), tape.param(b.b1)));
    x = tape.add(x, tape.add_row(tape.matmul(hidden, tape.param(b.w2)), tape.param(b.b2)));
  }
  return tape.mean_rows(x);
}

ad::Vector EncoderModel::encode(std::span<const int> ids) const {
  ad::Tape tape;
  return forward(tape, ids).value().row(0).transpose();
}

std::vector<ad::Parameter*> EncoderModel::parameters() {
  std::vector<ad::Parameter*> out{&token_embedding_};
  if (spec_.positional) out.push_back(&position_embedding_);
  for (auto& b : blocks_) {
    for (auto* p : {&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.b1, &b.w2, &b.b2}) out.push_back(p);
  }
  return out;
}

std::vector<const ad::Parameter*> EncoderModel::parameters() const {
  auto ps = const_cast<EncoderModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

// ---------------------------------------------------------------------------

ProjectionHead::ProjectionHead(int input_dim, int output_dim, std::uint64_t seed, bool bias) {
  if (input_dim < 1 || output_dim < 1) throw ValidationError("invalid projection head dims");
  std::mt19937_64 rng(seed);
  weight_ = ad::Parameter("proj.weight", uniform(input_dim, output_dim, rng));
  if (bias) bias_ = ad::Parameter("proj.bias", ad::Matrix::Zero(1, output_dim));
}

ad::Var ProjectionHead::forward(ad::Tape& tape, ad::Var hidden) const {
  auto z = tape.matmul(hidden, tape.param(weight_));
  if (has_bias()) z = tape.add_row(z, tape.param(bias_));
  return tape.l2_normalize(z);
}

ad::Vector ProjectionHead::project(const ad::Vector& hidden) const {
  if (!hidden.allFinite()) throw ValidationError("projection input is not finite");
  if (hidden.size() != input_dim()) throw ContractError("projection input has the wrong dimension");
  ad::Tape tape;
  auto h = tape.constant(hidden.transpose());
  return forward(tape, h).value().row(0).transpose();
}

std::vector<ad::Parameter*> ProjectionHead::parameters() {
  std::vector<ad::Parameter*> out{&weight_};
  if (has_bias()) out.push_back(&bias_);
  return out;
}

std::vector<const ad::Parameter*> ProjectionHead::parameters() const {
  auto ps = const_cast<ProjectionHead*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

// ---------------------------------------------------------------------------

InputGradient grad_wrt_input(const ad::Parameter& token_embedding, std::span<const int> ids,
                             const std::function<ad::Var(ad::Tape&, ad::Var)>& forward,
                             const LossHook& loss) {
  if (!loss.value || !loss.gradient) throw ContractError("loss hook must provide value and gradient");
  if (ids.empty()) throw ValidationError("grad_wrt_input requires a non-empty id sequence");
  const auto& table = token_embedding.value;
  ad::Matrix rows(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw ValidationError("token id out of range");
    rows.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  }
  ad::Tape tape;
  auto x = tape.input(std::move(rows));
  auto out = forward(tape, x);
  const ad::Vector y = out.value().row(0).transpose();
  InputGradient result;
  result.loss = loss.value(y);
  const ad::Vector g = loss.gradient(y);
  if (g.size() != y.size()) throw ContractError("loss gradient has the wrong dimension");
  tape.backward(out, g.transpose());
  result.onehot = tape.grad(x) * table.transpose();
  return result;
}

InputGradient grad_wrt_input(const EncoderModel& model, std::span<const int> ids, const LossHook& loss) {
  if (ids.size() > static_cast<std::size_t>(model.spec().max_len)) {
    ids = ids.first(static_cast<std::size_t>(model.spec().max_len));
  }
  return grad_wrt_input(
      model.token_embedding(), ids,
      [&model](ad::Tape& tape, ad::Var x) { return model.forward_embedded(tape, x); }, loss);
}

std::uint64_t checksum(std::span<const ad::Parameter* const> params) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto* p : params) {
    mix(p->name.data(), p->name.size());
    const std::int64_t shape[2] = {p->value.rows(), p->value.cols()};
    mix(shape, sizeof(shape));
    mix(p->value.data(), static_cast<std::size_t>(p->value.size()) * sizeof(double));
  }
  return h;
}

std::string checksum_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace detectlab
