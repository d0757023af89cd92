#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gapgrad {

// Root of every error thrown by the library. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed argument: wrong size, non-unit vector, negative where positive required.
class InputError : public Error {
 public:
  using Error::Error;
};

// Point or parameter outside the region where the operation is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an experiment does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Valid input the toolkit does not cover (e.g. d > 3 eigensolves).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Iterative method stopped without meeting its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}

  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace gapgrad
