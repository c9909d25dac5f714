#pragma once

#include <stdexcept>
#include <string>

namespace spidereval {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, out-of-range values, violated preconditions.
/// `field()` names the offending input (a config key, a column, a file).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message, std::string field = {})
      : Error(message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Numerical failure on valid input (singular systems, degenerate statistics).
class ComputationError : public Error {
 public:
  using Error::Error;
};

}  // namespace spidereval
