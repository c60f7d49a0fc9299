#ifndef DETECTLAB_ENCODER_HPP
#define DETECTLAB_ENCODER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "detectlab/autograd.hpp"

namespace detectlab {

class Corpus;

// Whitespace + lowercase + punctuation-splitting tokenizer over a fixed vocabulary.
class Tokenizer {
 public:
  static constexpr std::string_view kUnkToken = "<unk>";

  Tokenizer() = default;
  // `tokens[i]` is the string for id i. `unk_id` must index into `tokens`.
  Tokenizer(std::vector<std::string> tokens, int unk_id, int max_len = 256);

  // Vocabulary of pieces seen at least `min_freq` times, most frequent first
  // (ties by string). The unknown token takes id 0.
  static Tokenizer build(std::span<const std::string> texts, int min_freq = 2, int max_len = 256);
  static Tokenizer build(const Corpus& corpus, int min_freq = 2, int max_len = 256);

  // Normalized pieces of a text: lowercase ASCII, alphanumeric runs, one piece per punctuation mark.
  static std::vector<std::string> split(std::string_view text);

  // Truncates to max_len tokens. Throws ValidationError on blank text.
  std::vector<int> tokenize(std::string_view text) const;
  std::vector<int> tokenize_full(std::string_view text) const;
  std::string detokenize(std::span<const int> ids) const;

  int vocab_size() const { return static_cast<int>(tokens_.size()); }
  int unk_id() const { return unk_id_; }
  int max_len() const { return max_len_; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::optional<int> find(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Tokenizer& other) const {
    return tokens_ == other.tokens_ && unk_id_ == other.unk_id_ && max_len_ == other.max_len_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int unk_id_ = 0;
  int max_len_ = 256;
};

struct EncoderSpec {
  int vocab_size = 0;
  int hidden_dim = 64;
  int layers = 2;
  int ff_dim = 128;
  int max_len = 256;
  bool positional = true;

  bool operator==(const EncoderSpec&) const = default;
};

// Small self-attention encoder with mean pooling:
//   x = E[ids] + P[0..T)
//   per block: x += softmax(xWq (xWk)^T / sqrt(d)) xWv Wo ; x += tanh(xW1 + b1)W2 + b2
//   h = mean over positions
class EncoderModel {
 public:
  EncoderModel() = default;
  // Weights uniform(-0.05, 0.05), biases zero.
  EncoderModel(const EncoderSpec& spec, std::uint64_t seed);
  static EncoderModel zeros(const EncoderSpec& spec);

  const EncoderSpec& spec() const { return spec_; }
  int hidden_dim() const { return spec_.hidden_dim; }

  // Records the forward pass on `tape`; returns the 1 x d_h pooled output.
  // Input longer than max_len is truncated.
  ad::Var forward(ad::Tape& tape, std::span<const int> ids) const;
  // Same, starting from already-embedded token rows (T x d_h).
  ad::Var forward_embedded(ad::Tape& tape, ad::Var token_rows) const;

  ad::Vector encode(std::span<const int> ids) const;

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  const ad::Parameter& token_embedding() const { return token_embedding_; }

 private:
  struct Block {
    ad::Parameter wq, wk, wv, wo, w1, b1, w2, b2;
  };
  void allocate(const EncoderSpec& spec);

  EncoderSpec spec_;
  ad::Parameter token_embedding_;
  ad::Parameter position_embedding_;
  std::vector<Block> blocks_;
};

// Linear map d_h -> d_z (optional bias) followed by L2 normalization.
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(int input_dim, int output_dim, std::uint64_t seed, bool bias = false);

  int input_dim() const { return static_cast<int>(weight_.value.rows()); }
  int output_dim() const { return static_cast<int>(weight_.value.cols()); }
  bool has_bias() const { return bias_.value.size() > 0; }

  // Returns the unit-norm 1 x d_z row. Throws DegenerateError below 1e-12.
  ad::Var forward(ad::Tape& tape, ad::Var hidden) const;
  ad::Vector project(const ad::Vector& hidden) const;

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

 private:
  ad::Parameter weight_;
  ad::Parameter bias_;
};

// Scalar function of an encoder output, with its gradient.
struct LossHook {
  std::function<double(const ad::Vector&)> value;
  std::function<ad::Vector(const ad::Vector&)> gradient;
};

struct InputGradient {
  double loss = 0.0;
  // sequence length x vocab size: d loss / d one-hot[t][v].
  ad::Matrix onehot;
};

// Gradient of `loss(encode(ids))` with respect to the one-hot token matrix.
// Throws ContractError when the hook has no gradient.
InputGradient grad_wrt_input(const EncoderModel& model, std::span<const int> ids, const LossHook& loss);

// Same, with the forward pass supplied by the caller (e.g. encoder + head).
// `forward` maps embedded token rows to the output the loss consumes.
InputGradient grad_wrt_input(const ad::Parameter& token_embedding, std::span<const int> ids,
                             const std::function<ad::Var(ad::Tape&, ad::Var)>& forward,
                             const LossHook& loss);

// FNV-1a over parameter names, shapes and raw values.
std::uint64_t checksum(std::span<const ad::Parameter* const> params);
std::string checksum_hex(std::uint64_t value);

}  // namespace detectlab

#endif  // DETECTLAB_ENCODER_HPP
