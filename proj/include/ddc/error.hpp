#pragma once

#include <stdexcept>
#include <string>

namespace ddc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad inputs: shapes, ranges, schema violations, unknown config keys.
struct ConfigError : Error {
  using Error::Error;
};

// NaN/Inf intermediates, impossible probabilities, singular systems.
struct NumericError : Error {
  using Error::Error;
};

// Iteration budget exhausted before reaching tolerance.
struct ConvergenceError : Error {
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual(residual), iterations(iterations) {}
  double residual = 0.0;
  int iterations = 0;
};

}  // namespace ddc
