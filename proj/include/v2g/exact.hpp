#pragma once

#include <span>
#include <vector>

#include "v2g/model.hpp"

namespace v2g {

struct ExactConfig {
  double qp_tolerance = 1e-8;
  long long budget_guard = 1'000'000;  // refuse larger candidate products
};

struct JointSolveResult {
  std::vector<Allocation> allocations;
  double social_cost = 0.0;
};

// Joint convex program over all power profiles with the disconnection times
// fixed, including the hard two-sided bus constraint.
JointSolveResult solve_joint_fixed_tau(const StationScenario& scenario,
                                       std::span<const int> tau_vector, double tol = 1e-8);

// Exact optimum over the candidate product set by depth-first enumeration.
// Partial assignments are cut when their delay cost plus a relaxed bound on
// the profile cost already exceeds the incumbent. Equal-cost tau vectors
// resolve to the lexicographically smallest delay vector. In the returned
// solution, sweeps_used counts the joint programs actually solved.
ScheduleSolution solve_exact(const StationScenario& scenario,
                             const std::vector<std::vector<int>>& tau_candidates_per_ev,
                             const ExactConfig& config = {});

// Convenience overload with the full candidate set {0, ..., T} for every EV.
ScheduleSolution solve_exact(const StationScenario& scenario, const ExactConfig& config = {});

}  // namespace v2g
