#pragma once

#include <stdexcept>
#include <string>

namespace eqprop {

// Root of every exception thrown by the library. Each subclass maps onto one
// CLI exit code (see commands.h).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or size mismatch between tensors, topologies or files.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf inputs or overflowing dynamics.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameters, unknown config keys, unparsable values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed binary input (IDX, checkpoint): bad magic, truncation, bad values.
class FormatError : public Error {
 public:
  using Error::Error;
};

// File system failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// A relaxation did not reach the requested residual within its budget.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double residual)
      : NumericError(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// An oracle was called on an instance outside its domain of validity
// (boundary-touching fixed point, indefinite Hessian, state dimension too
// large for quadrature, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace eqprop
