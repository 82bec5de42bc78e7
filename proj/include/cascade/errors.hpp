#pragma once

#include <stdexcept>
#include <string>

namespace cascade {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or data rejected at construction/parse time.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not match.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A linear system that must be uniquely solvable turned out singular.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// Overflow, NaN/Inf, or an iteration that failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cascade
