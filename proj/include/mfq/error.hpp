#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mfq {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input text could not be parsed; the message names the line and field.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Parsed input breaks one or more invariants. All violations are kept.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> violations_;
};

/// A caller broke an operation's precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration is invalid or inconsistent with an existing store.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// No samples survive inclusion rules for a population or group.
class EmptyPopulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfq
