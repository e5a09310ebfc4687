#pragma once

#include <stdexcept>
#include <string>

namespace shiftdiag {

// Base of every error raised by the engine. The CLI and service map the
// concrete subclasses onto exit codes / HTTP statuses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad CSV, missing column, spec inconsistency.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Moment constraints that no simplex weighting can satisfy.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::string label)
      : Error(what), label_(std::move(label)) {}
  const std::string& label() const noexcept { return label_; }

 private:
  std::string label_;
};

// Rank-deficient regression design or collinear balancing features.
class SingularError : public Error {
 public:
  using Error::Error;
};

// Selection adjustment could not be carried out (event absent, optimizer
// failure, covariance pathology).
class SelectionError : public Error {
 public:
  using Error::Error;
};

}  // namespace shiftdiag
