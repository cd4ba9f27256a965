#pragma once

#include <stdexcept>
#include <string>

namespace mmot {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree (block sizes, grid lengths, n vs n^2).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition (negative mass, unsorted grid,
/// non-Hermitian block in strict mode, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Marginals cannot be coupled, e.g. unequal total mass.
class InfeasibleProblem : public Error {
 public:
  using Error::Error;
};

/// A numerical kernel failed (eigendecomposition did not converge, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmot
