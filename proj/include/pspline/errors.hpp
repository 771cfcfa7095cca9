#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pspline {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by a Cholesky factorization when a pivot is not strictly positive.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(std::size_t pivot, double value)
      : Error("matrix is not positive definite: pivot " + std::to_string(pivot) +
              " = " + std::to_string(value)),
        pivot_(pivot),
        value_(value) {}

  std::size_t pivot() const noexcept { return pivot_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t pivot_;
  double value_;
};

/// The stacked normal-equation system has no unique solution.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

/// Bad user input: malformed files, missing columns, out-of-range arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace pspline
