#pragma once

#include <vector>

#include "v2g/admm.hpp"
#include "v2g/exact.hpp"
#include "v2g/model.hpp"

namespace v2g {

enum class SolverKind { kExact, kAdmm };

// What the station charges when payments are not the VCG tax: nothing, or
// the market price of the energy an EV actually received.
enum class PaymentRule { kVcg, kNone, kEnergyAtMarket };

struct MechanismConfig {
  SolverKind solver = SolverKind::kExact;  // VCG's guarantees need the exact solver
  ExactConfig exact;
  AdmmConfig admm;
  double ir_tolerance = 1e-6;
  bool warn_on_admm = true;  // stderr note that ADMM payments are approximate
};

struct MechanismOutcome {
  std::vector<Allocation> allocations;
  std::vector<double> payments;         // $, positive = EV pays the station
  std::vector<double> utilities;        // $, -cost - payment per EV
  std::vector<double> outside_options;  // $, utility of never connecting
  std::vector<bool> ir_satisfied;
  double station_budget = 0.0;          // sum of payments - total energy cost
};

// Welfare-maximizing allocation treating the reports as truthful types.
std::vector<Allocation> vcg_allocation(const StationScenario& scenario,
                                       const std::vector<EvType>& reports,
                                       const MechanismConfig& config = {});

// Externality payment of EV n: its own energy cost plus the change in every
// peer's cost (driver cost and energy) caused by its presence, measured
// against a re-solve of the scenario with EV n removed.
double vcg_payment(const StationScenario& scenario, const std::vector<EvType>& reports, int n,
                   const MechanismConfig& config = {});

// Utility of staying disconnected: no delay, no payment, the full SoC gap.
double outside_option_utility(const Ev& ev);

// Full mechanism run: one welfare solve plus one leave-one-out solve per EV.
MechanismOutcome run_vcg(const StationScenario& scenario, const std::vector<EvType>& reports,
                         const MechanismConfig& config = {});

struct MisreportPoint {
  EvType report;
  double utility = 0.0;  // EV n's true-type utility under this report
};

// Utility surface of EV n across a grid of its own reports, everyone else
// truthful, under the chosen payment rule.
std::vector<MisreportPoint> misreport_sweep(const StationScenario& scenario, int n,
                                            const std::vector<EvType>& report_grid,
                                            PaymentRule rule, const MechanismConfig& config = {});

// Default 5x5 grid: desired disconnection shifted by {-4,-2,0,2,4} intervals
// (clamped to the horizon) times inflexibility scaled by {1/4,1/2,1,2,4}.
std::vector<EvType> default_misreport_grid(const Ev& ev, int horizon);

}  // namespace v2g
