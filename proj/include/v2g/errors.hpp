#pragma once

#include <stdexcept>
#include <string>

namespace v2g {

// Raised on malformed user input: files, schemas, argument values.
class InputError : public std::runtime_error {
public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when an optimization kernel fails to converge. Carries the last
// residuals so callers can report where the solve got stuck.
class SolverError : public std::runtime_error {
public:
  SolverError(const std::string& what, double primal_residual, double dual_residual, double gap,
              int iterations)
      : std::runtime_error(what),
        primal_residual(primal_residual),
        dual_residual(dual_residual),
        gap(gap),
        iterations(iterations) {}

  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
};

}  // namespace v2g
