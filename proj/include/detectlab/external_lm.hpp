#ifndef DETECTLAB_EXTERNAL_LM_HPP
#define DETECTLAB_EXTERNAL_LM_HPP

#include <mutex>
#include <string>

#include "detectlab/training_free.hpp"

namespace detectlab {

// Language model served by a child process over line-delimited JSON on stdin/stdout.
//
//   -> {"op":"info"}                      <- {"vocab_size":V}
//   -> {"op":"logprobs","prefix":[ids]}   <- {"logprobs":[V doubles]}
//
// The child is started with /bin/sh -c <command> and closed on destruction.
class ExternalLM final : public CausalLM {
 public:
  explicit ExternalLM(const std::string& command);
  ~ExternalLM() override;
  ExternalLM(const ExternalLM&) = delete;
  ExternalLM& operator=(const ExternalLM&) = delete;

  int vocab_size() const override { return vocab_size_; }
  std::vector<double> next_log_probs(std::span<const int> prefix) const override;

 private:
  std::string request(const std::string& line) const;

  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  int vocab_size_ = 0;
  mutable std::string buffer_;
  mutable std::mutex mutex_;
};

}  // namespace detectlab

#endif  // DETECTLAB_EXTERNAL_LM_HPP
