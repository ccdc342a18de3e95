#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hkc {

/// Argument outside the mathematical domain of a function (t <= 0, s < 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Copula or generator parameter outside its family's admissible range.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure: non-finite result, bracketing failure, tolerance not met.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested level lies outside the range attainable by the copula quantile curve.
class NoSolutionError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Evaluation point outside the support of a conditional distribution.
class SupportError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Rejection sampler gave up after the configured number of attempts.
class AttemptCapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration or data file; the message carries the location.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structural problems found while validating a hierarchical model.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(std::vector<std::string> issues);

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  std::vector<std::string> issues_;
};

}  // namespace hkc
