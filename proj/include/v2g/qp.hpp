#pragma once

#include <Eigen/Dense>

namespace v2g::qp {

// Dense convex quadratic program
//   minimize    0.5 x'Px + q'x
//   subject to  Ax <= b
// with P symmetric positive semidefinite. Sized for this project's
// subproblems (a few hundred variables), solved by a primal-dual
// interior-point method with Mehrotra predictor-corrector steps.
struct Problem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

struct Settings {
  double gap_tolerance = 1e-8;      // absolute complementarity gap s'z
  double residual_tolerance = 1e-9; // relative primal/dual residual
  int max_iterations = 10000;       // hard cap; typical solves need < 40
};

struct Solution {
  Eigen::VectorXd x;
  Eigen::VectorXd dual;  // multipliers for Ax <= b, nonnegative
  double objective = 0.0;
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
};

// Throws v2g::SolverError if the iteration limit is hit or progress stalls.
Solution solve(const Problem& problem, const Settings& settings = {});

}  // namespace v2g::qp
