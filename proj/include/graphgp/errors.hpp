#pragma once

#include <stdexcept>
#include <string>

namespace graphgp {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed files, inconsistent shapes, invalid parameters.
// The CLI maps these to exit code 2.
struct InputError : Error {
  using Error::Error;
};

// Numerical failure at runtime: factorization breakdown, non-convergence,
// singular operators. The CLI maps these to exit code 3.
struct NumericalError : Error {
  using Error::Error;
};

struct DimensionMismatch : InputError {
  using InputError::InputError;
};

struct ParseError : InputError {
  using InputError::InputError;
};

struct InfeasibleDegree : InputError {
  using InputError::InputError;
};

struct NotPositiveDefinite : NumericalError {
  using NumericalError::NumericalError;
};

struct ConvergenceFailure : NumericalError {
  using NumericalError::NumericalError;
};

struct SingularForNegativePower : NumericalError {
  using NumericalError::NumericalError;
};

struct SingularMatrix : NumericalError {
  using NumericalError::NumericalError;
};

struct GenerationFailure : NumericalError {
  using NumericalError::NumericalError;
};

struct NonpositivePEntry : NumericalError {
  using NumericalError::NumericalError;
};

struct StaleCache : InputError {
  using InputError::InputError;
};

struct AllRestartsFailed : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace graphgp
