#pragma once

#include <span>
#include <vector>

#include "v2g/model.hpp"

namespace v2g {

// Dual state of the relaxed bus constraint. The projection in the dual
// ascent step keeps every multiplier nonnegative.
struct DualState {
  std::vector<double> multipliers;  // lambda, one per interval
  double penalty = 1.0;             // nu > 0
};

// Everything one EV's subproblem sees besides its own parameters: the
// aggregated load of its peers (Gauss-Seidel freshest iterates), the dual
// state, and the station-wide constants.
struct SubproblemContext {
  std::vector<double> other_load;  // kW, length T
  DualState duals;
  std::vector<double> prices;      // $/kWh, length T
  double interval_hours = 0.0;
  double bus_capacity = 0.0;       // kW
};

struct FixedTauResult {
  std::vector<double> profile;  // kW, length T, zero from tau on
  double objective = 0.0;       // augmented cost at the minimizer
  // Worst simultaneous charge/discharge in the raw QP iterate, before the
  // split is reduced; the returned profile itself never carries both.
  double raw_complementarity = 0.0;
};

struct EvSubproblemResult {
  int tau = 0;
  std::vector<double> profile;
  double objective = 0.0;
};

// Augmented per-EV cost: own cost + energy cost - sum lambda^2 / (2 nu)
// + sum [lambda + nu(|u + other_load| - C_bus)]_+^2 / (2 nu).
double augmented_objective(const Ev& ev, int tau, std::span<const double> profile,
                           const SubproblemContext& ctx);

// Minimizes the augmented cost over the power profile for a fixed
// disconnection time, subject to the EV's rate and SoC constraints.
// The absolute values and hinges are lifted into a convex QP via a
// charge/discharge split and epigraph slacks.
FixedTauResult solve_fixed_tau(const Ev& ev, int tau, const SubproblemContext& ctx,
                               double tol = 1e-6);

// Minimizes over the candidate disconnection times as well. Ties are broken
// toward the candidate closest to the desired time, then the smallest one.
// Candidates whose delay term alone already exceeds the incumbent (relative
// to the most relaxed candidate's profile cost) are skipped.
EvSubproblemResult solve_ev_subproblem(const Ev& ev, const SubproblemContext& ctx,
                                       std::span<const int> tau_candidates, double tol = 1e-6);

}  // namespace v2g
