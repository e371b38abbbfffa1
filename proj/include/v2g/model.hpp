#pragma once

#include <span>
#include <string>
#include <vector>

namespace v2g {

// Public per-EV physics. Known to the station coordinator.
struct EvStaticParams {
  double battery_capacity = 0.0;    // kWh
  double efficiency = 1.0;          // power transfer efficiency, in [0, 1]
  double wear_cost = 0.0;           // $ per kWh transferred (either direction)
  double initial_soc = 0.0;         // kWh
  double max_charge_rate = 0.0;     // kW
  double max_discharge_rate = 0.0;  // kW

  void validate() const;  // throws InputError on a violated invariant
};

// Private per-EV preferences, reported by the driver on connection.
struct EvType {
  int desired_disconnect = 0;          // interval index in {0, ..., T}
  double desired_soc = 0.0;            // kWh
  double temporal_inflexibility = 0.0; // $/h^2, cost of a one-hour delay
  double soc_inflexibility = 0.0;      // $/kWh^2

  void validate(const EvStaticParams& params, int horizon) const;
};

struct Ev {
  EvStaticParams params;
  EvType type;
};

struct StationScenario {
  int horizon = 0;             // number of intervals T
  double interval_hours = 0.0; // duration of one interval, h
  std::vector<double> prices;  // $/kWh, one entry per interval
  double bus_capacity = 0.0;   // kW
  std::vector<Ev> fleet;

  int num_evs() const { return static_cast<int>(fleet.size()); }
  void validate() const;
};

// The coordinator's decision for one EV: when it disconnects and the power
// it exchanges in each interval (positive = charging, negative = discharging).
struct Allocation {
  int disconnect_time = 0;           // tau in {0, ..., T}
  std::vector<double> power_profile; // kW, length T; zero for t >= disconnect_time
};

enum class ConstraintId { kRate, kSocBox, kPostDisconnect, kBus };

std::string to_string(ConstraintId id);

struct Violation {
  ConstraintId constraint;
  int ev;          // fleet index, -1 for the shared bus
  int time;        // interval index
  double magnitude;
};

struct FeasibilityReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// One (cost, residual) sample per ADMM sweep, plus the running best tracker.
struct SweepTrace {
  int sweep = 0;
  double cost = 0.0;          // social cost of this sweep's repaired iterate
  double residual = 0.0;      // raw bus violation of this sweep's iterate, kW
  double best_cost = 0.0;     // cheapest repaired cost seen so far
  double best_residual = 0.0; // smallest raw residual seen so far
};

// Shared result shape for the schedule solvers.
struct ScheduleSolution {
  std::vector<Allocation> allocations;
  double social_cost = 0.0;
  double primal_residual = 0.0; // raw bus violation of the selected iterate, kW
  int sweeps_used = 0;
  bool converged = false;
  std::vector<SweepTrace> per_sweep_trace;
};

// SoC evolution under a power profile: output[0] = initial_soc and
// output[t] = initial_soc + efficiency * sum_{k<t} profile[k] * interval_hours.
// Efficiency multiplies both signs of flow.
std::vector<double> soc_trajectory(const EvStaticParams& params, std::span<const double> profile,
                                   double interval_hours);

// Driver cost: temporal term alpha * ((tau - tau_d) * dt)^2 with the delay in
// hours, SoC shortfall term beta * max(0, s_d - s[T])^2, and linear battery
// wear wear_cost * |u|_1 * dt.
double ev_cost(const EvStaticParams& params, const EvType& type, const Allocation& alloc,
               double interval_hours);

// sum_t prices[t] * profile[t] * interval_hours.
double energy_cost(std::span<const double> prices, std::span<const double> profile,
                   double interval_hours);

// Coordinator objective: sum over the fleet of ev_cost + energy_cost.
double social_cost(const StationScenario& scenario, const std::vector<Allocation>& allocations);

// Reports every constraint violated by more than `tolerance`, tagged with the
// offending EV (or the bus), interval and magnitude.
FeasibilityReport check_feasible(const StationScenario& scenario,
                                 const std::vector<Allocation>& allocations,
                                 double tolerance = 1e-6);

// Uncoordinated reference schedule: all EVs charge in parallel from t = 0,
// splitting min(bus_capacity, total charge rate) in equal shares capped by the
// per-EV rate, each stopping once its desired SoC (or battery) is reached.
std::vector<Allocation> naive_parallel_schedule(const StationScenario& scenario);

}  // namespace v2g
