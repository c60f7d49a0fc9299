#ifndef DETECTLAB_ERRORS_HPP
#define DETECTLAB_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace detectlab {

// Exit codes used by the command-line tool.
enum class ErrorCategory { Config = 2, Data = 3, Runtime = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorCategory::Data, "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyInputError : public Error {
 public:
  explicit EmptyInputError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class StratificationError : public Error {
 public:
  explicit StratificationError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class SamplingError : public Error {
 public:
  explicit SamplingError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

// Violated API contract between components (wrong shapes, mismatched
// vocabularies, non-differentiable hooks).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorCategory::Runtime, what) {}
};

class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& what) : Error(ErrorCategory::Runtime, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::Config, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::Runtime, what) {}
};

}  // namespace detectlab

#endif  // DETECTLAB_ERRORS_HPP
