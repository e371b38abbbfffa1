#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "v2g/model.hpp"
#include "v2g/subproblem.hpp"

namespace v2g {

struct AdmmConfig {
  double penalty = 0.25;           // nu; small steps avoid overshooting delays
  int max_sweeps = 200;
  double primal_tolerance = 1e-3;  // kW, on the raw bus violation
  int stall_window = 5;            // sweeps without cost improvement before stopping
  int tau_window = -1;             // candidate taus within +/- window of tau_d; -1 = all
  double subproblem_tolerance = 1e-6;
  bool randomize_order = false;    // shuffle the sweep order each sweep
  std::uint64_t order_seed = 0;

  void validate() const;
};

// Gauss-Seidel ADMM over the fleet with dual ascent on the bus constraint.
// Keeps the cheapest feasible-after-repair iterate rather than the last one.
ScheduleSolution run_admm(const StationScenario& scenario, const AdmmConfig& config = {});

// lambda_t <- [lambda_t + nu (|total_load_t| - bus_capacity)]_+
DualState dual_update(const DualState& duals, std::span<const double> total_load,
                      double bus_capacity);

// Scales same-sign flows at each bus-violating interval back inside the
// capacity, then trims any power exchange that the new trajectory can no
// longer absorb. Requires input satisfying the per-EV constraints; the
// output passes check_feasible.
std::vector<Allocation> repair_bus(const StationScenario& scenario,
                                   std::vector<Allocation> allocations);

}  // namespace v2g
