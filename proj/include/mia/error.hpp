#pragma once

#include <stdexcept>
#include <string>

namespace mia {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { config = 2, data = 3, divergence = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

/// Invalid argument, configuration value or precondition violation.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Malformed, truncated or mismatched file contents and data-shape errors.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Non-finite loss or gradient during optimisation.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(ErrorKind::divergence, what) {}
};

}  // namespace mia
