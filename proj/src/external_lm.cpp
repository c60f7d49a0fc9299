#include "detectlab/external_lm.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "detectlab/errors.hpp"

namespace detectlab {

ExternalLM::ExternalLM(const std::string& command) {
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) throw IoError("pipe() failed: " + std::string(std::strerror(errno)));
  const pid_t pid = fork();
  if (pid < 0) throw IoError("fork() failed: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  std::signal(SIGPIPE, SIG_IGN);

  try {
    const auto reply = nlohmann::json::parse(request(R"({"op":"info"})"));
    vocab_size_ = reply.at("vocab_size").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("external LM handshake failed: ") + e.what());
  }
  if (vocab_size_ < 1) throw ContractError("external LM reported vocab_size < 1");
}

ExternalLM::~ExternalLM() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

std::string ExternalLM::request(const std::string& line) const {
  const std::string msg = line + "\n";
  std::size_t sent = 0;
  while (sent < msg.size()) {
    const auto n = write(to_child_, msg.data() + sent, msg.size() - sent);
    if (n <= 0) throw IoError("external LM closed its input");
    sent += static_cast<std::size_t>(n);
  }
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string reply = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return reply;
    }
    char chunk[4096];
    const auto n = read(from_child_, chunk, sizeof(chunk));
    if (n <= 0) throw IoError("external LM closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::vector<double> ExternalLM::next_log_probs(std::span<const int> prefix) const {
  nlohmann::json req = {{"op", "logprobs"}, {"prefix", std::vector<int>(prefix.begin(), prefix.end())}};
  std::lock_guard lock(mutex_);
  std::vector<double> lp;
  try {
    lp = nlohmann::json::parse(request(req.dump())).at("logprobs").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("malformed external LM reply: ") + e.what());
  }
  if (static_cast<int>(lp.size()) != vocab_size_) throw ContractError("external LM returned the wrong vocabulary length");
  double mass = 0.0;
  for (double l : lp) mass += std::exp(l);
  if (std::abs(mass - 1.0) > 1e-6) throw ContractError("external LM distribution does not sum to 1");
  return lp;
}

}  // namespace detectlab
