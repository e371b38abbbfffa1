#include "v2g/admm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "v2g/errors.hpp"
#include "v2g/exact.hpp"

namespace v2g {

namespace {

double bus_residual(const StationScenario& scenario, const std::vector<Allocation>& allocations) {
  double worst = 0.0;
  for (int t = 0; t < scenario.horizon; ++t) {
    double total = 0.0;
    for (const Allocation& a : allocations) total += a.power_profile[t];
    worst = std::max(worst, std::abs(total) - scenario.bus_capacity);
  }
  return std::max(0.0, worst);
}

std::vector<int> tau_candidates_for(const Ev& ev, int horizon, int window) {
  int lo = 0, hi = horizon;
  if (window >= 0) {
    lo = std::max(0, ev.type.desired_disconnect - window);
    hi = std::min(horizon, ev.type.desired_disconnect + window);
  }
  std::vector<int> candidates(hi - lo + 1);
  std::iota(candidates.begin(), candidates.end(), lo);
  return candidates;
}

}  // namespace

void AdmmConfig::validate() const {
  if (penalty <= 0.0) throw InputError("admm: penalty must be > 0");
  if (max_sweeps < 1) throw InputError("admm: max_sweeps must be >= 1");
  if (primal_tolerance <= 0.0) throw InputError("admm: primal_tolerance must be > 0");
  if (stall_window < 1) throw InputError("admm: stall_window must be >= 1");
}

DualState dual_update(const DualState& duals, std::span<const double> total_load,
                      double bus_capacity) {
  if (duals.multipliers.size() != total_load.size())
    throw InputError("admm: dual/load length mismatch");
  DualState next = duals;
  for (std::size_t t = 0; t < total_load.size(); ++t) {
    next.multipliers[t] = std::max(
        0.0, duals.multipliers[t] + duals.penalty * (std::abs(total_load[t]) - bus_capacity));
  }
  return next;
}

std::vector<Allocation> repair_bus(const StationScenario& scenario,
                                   std::vector<Allocation> allocations) {
  const int num_evs = scenario.num_evs();
  const int horizon = scenario.horizon;
  const double cap = scenario.bus_capacity;
  const double dt = scenario.interval_hours;

  for (int pass = 0; pass < 50; ++pass) {
    // Bus pass: pull each violating interval back inside the capacity.
    for (int t = 0; t < horizon; ++t) {
      for (int inner = 0; inner < 8; ++inner) {
        double total = 0.0;
        for (const Allocation& a : allocations) total += a.power_profile[t];
        if (std::abs(total) <= cap + 1e-12) break;
        const double factor = cap / std::abs(total) * (1.0 - 1e-12);
        const bool positive = total > 0.0;
        const bool last_resort = inner == 7;
        for (Allocation& a : allocations) {
          double& u = a.power_profile[t];
          if (last_resort || (positive ? u > 0.0 : u < 0.0)) u *= factor;
        }
      }
    }

    // SoC pass: walk each trajectory and trim whatever no longer fits.
    for (int n = 0; n < num_evs; ++n) {
      const EvStaticParams& params = scenario.fleet[n].params;
      if (params.efficiency <= 0.0) continue;
      double soc = params.initial_soc;
      for (int t = 0; t < horizon; ++t) {
        double& u = allocations[n].power_profile[t];
        const double next = soc + params.efficiency * u * dt;
        if (next > params.battery_capacity) {
          u = (params.battery_capacity - soc) / (params.efficiency * dt);
        } else if (next < 0.0) {
          u = -soc / (params.efficiency * dt);
        }
        soc += params.efficiency * u * dt;
      }
    }

    if (check_feasible(scenario, allocations, 1e-9).ok()) return allocations;
  }

  // Unreachable in practice; the all-zero schedule is always feasible.
  for (Allocation& a : allocations) std::fill(a.power_profile.begin(), a.power_profile.end(), 0.0);
  return allocations;
}

ScheduleSolution run_admm(const StationScenario& scenario, const AdmmConfig& config) {
  scenario.validate();
  config.validate();
  const int num_evs = scenario.num_evs();
  const int horizon = scenario.horizon;

  std::vector<Allocation> current(num_evs);
  for (int n = 0; n < num_evs; ++n) {
    current[n].disconnect_time = scenario.fleet[n].type.desired_disconnect;
    current[n].power_profile.assign(horizon, 0.0);
  }
  DualState duals{std::vector<double>(horizon, 0.0), config.penalty};

  std::vector<std::vector<int>> candidates(num_evs);
  for (int n = 0; n < num_evs; ++n) {
    candidates[n] = tau_candidates_for(scenario.fleet[n], horizon, config.tau_window);
  }

  ScheduleSolution result;
  bool have_best = false;
  double best_cost = std::numeric_limits<double>::infinity();
  double best_residual_seen = std::numeric_limits<double>::infinity();
  int last_improvement_sweep = 0;
  std::vector<int> order(num_evs);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.order_seed);

  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    if (config.randomize_order) std::shuffle(order.begin(), order.end(), rng);

    const std::vector<Allocation> previous = current;
    const DualState previous_duals = duals;

    for (int n : order) {
      SubproblemContext ctx;
      ctx.other_load.assign(horizon, 0.0);
      for (int j = 0; j < num_evs; ++j) {
        if (j == n) continue;
        for (int t = 0; t < horizon; ++t) ctx.other_load[t] += current[j].power_profile[t];
      }
      ctx.duals = duals;
      ctx.prices = scenario.prices;
      ctx.interval_hours = scenario.interval_hours;
      ctx.bus_capacity = scenario.bus_capacity;

      EvSubproblemResult sub;
      try {
        sub = solve_ev_subproblem(scenario.fleet[n], ctx, candidates[n],
                                  config.subproblem_tolerance);
      } catch (const SolverError& err) {
        throw SolverError("admm: sweep " + std::to_string(sweep) + ", ev " + std::to_string(n) +
                              ": " + err.what(),
                          err.primal_residual, err.dual_residual, err.gap, err.iterations);
      }
      current[n].disconnect_time = sub.tau;
      current[n].power_profile = std::move(sub.profile);
    }

    const double residual = bus_residual(scenario, current);
    std::vector<Allocation> repaired = repair_bus(scenario, current);
    const double cost = social_cost(scenario, repaired);

    // The cheapest feasible-after-repair iterate wins, whichever sweep it
    // came from; the reported residual describes the returned schedule.
    const bool better =
        !have_best || cost < best_cost - 1e-9 * (1.0 + std::abs(best_cost));
    if (better) {
      have_best = true;
      best_cost = cost;
      result.primal_residual = bus_residual(scenario, repaired);
      result.allocations = std::move(repaired);
      result.social_cost = cost;
      last_improvement_sweep = sweep;
    }
    best_residual_seen = std::min(best_residual_seen, residual);
    result.per_sweep_trace.push_back({sweep, cost, residual, best_cost, best_residual_seen});
    result.sweeps_used = sweep;

    std::vector<double> total_load(horizon, 0.0);
    for (const Allocation& a : current) {
      for (int t = 0; t < horizon; ++t) total_load[t] += a.power_profile[t];
    }
    duals = dual_update(duals, total_load, scenario.bus_capacity);

    // Fixed point: nothing moved and the bus is satisfied.
    double delta = 0.0;
    for (int n = 0; n < num_evs; ++n) {
      if (current[n].disconnect_time != previous[n].disconnect_time) delta = 1.0;
      for (int t = 0; t < horizon; ++t) {
        delta = std::max(delta, std::abs(current[n].power_profile[t] -
                                         previous[n].power_profile[t]));
      }
    }
    double dual_delta = 0.0;
    for (int t = 0; t < horizon; ++t) {
      dual_delta = std::max(dual_delta,
                            std::abs(duals.multipliers[t] - previous_duals.multipliers[t]));
    }
    const bool fixed_point = delta <= 1e-12 && dual_delta <= 1e-12 &&
                             residual <= config.primal_tolerance;
    const bool stalled = residual <= config.primal_tolerance &&
                         sweep - last_improvement_sweep >= config.stall_window;
    if (fixed_point || stalled) {
      result.converged = true;
      break;
    }
  }

  // Gauss-Seidel sweeps settle the disconnection times well before the
  // profiles stop carrying coordination slack. Re-solving the convex part
  // jointly at the chosen times removes that slack; the repaired iterate
  // stays in place if the re-solve fails or does not help.
  if (!result.allocations.empty()) {
    std::vector<int> taus(num_evs);
    for (int n = 0; n < num_evs; ++n) taus[n] = result.allocations[n].disconnect_time;
    try {
      JointSolveResult polished = solve_joint_fixed_tau(scenario, taus);
      if (polished.social_cost < result.social_cost &&
          check_feasible(scenario, polished.allocations).ok()) {
        result.allocations = std::move(polished.allocations);
        result.social_cost = polished.social_cost;
        result.primal_residual = bus_residual(scenario, result.allocations);
      }
    } catch (const SolverError&) {
      // keep the repaired iterate
    }
  }
  return result;
}

}  // namespace v2g
