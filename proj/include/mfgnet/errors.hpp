#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

namespace mfgnet {

/// Short %g rendering of a number for error messages.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: a malformed graph, a mismatched grid function, a bad option.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  explicit ValidationError(const std::string& message) : Error(message) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// An iterative solver ran out of iterations.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double last_residual, int iterations)
      : Error(what), last_residual_(last_residual), iterations_(iterations) {}

  double last_residual() const noexcept { return last_residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double last_residual_;
  int iterations_;
};

/// A linear system that should be nonsingular could not be factorized, or a
/// kernel that should be one-dimensional is not.
class NumericallySingular : public Error {
 public:
  using Error::Error;
};

/// The stationary density has a nonpositive entry.
class NonPositiveDensity : public Error {
 public:
  NonPositiveDensity(const std::string& what, double min_value)
      : Error(what), min_value_(min_value) {}
  double min_value() const noexcept { return min_value_; }

 private:
  double min_value_;
};

}  // namespace mfgnet
