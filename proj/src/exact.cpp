#include "v2g/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "v2g/errors.hpp"
#include "v2g/qp.hpp"

namespace v2g {

namespace {

constexpr double kDustPower = 1e-5;  // kW

double max_violation(const StationScenario& scenario, const std::vector<Allocation>& allocations) {
  double worst = 0.0;
  for (const Violation& v : check_feasible(scenario, allocations, 1e-15).violations) {
    worst = std::max(worst, v.magnitude);
  }
  return worst;
}

// Zeroes sub-dust flows entry by entry, keeping only the clamps that do not
// worsen any constraint (SoC or bus boundaries may be ridden exactly).
void clamp_dust(const StationScenario& scenario, std::vector<Allocation>& allocations) {
  double current = max_violation(scenario, allocations);
  for (std::size_t n = 0; n < allocations.size(); ++n) {
    for (double& u : allocations[n].power_profile) {
      if (u == 0.0 || std::abs(u) >= kDustPower) continue;
      const double saved = u;
      u = 0.0;
      const double candidate = max_violation(scenario, allocations);
      if (candidate <= current + 1e-12) {
        current = candidate;
      } else {
        u = saved;
      }
    }
  }
}

}  // namespace

JointSolveResult solve_joint_fixed_tau(const StationScenario& scenario,
                                       std::span<const int> tau_vector, double tol) {
  scenario.validate();
  const int num_evs = scenario.num_evs();
  const int horizon = scenario.horizon;
  if (static_cast<int>(tau_vector.size()) != num_evs)
    throw InputError("exact: tau vector length must equal the fleet size");
  for (int tau : tau_vector) {
    if (tau < 0 || tau > horizon) throw InputError("exact: tau outside {0, ..., T}");
  }

  const double dt = scenario.interval_hours;

  // Variable layout per EV with tau > 0: charge split, discharge split
  // (omitted for discharge-incapable EVs), shortfall slack. EVs with
  // tau = 0 only contribute constants.
  std::vector<int> offset(num_evs, -1);
  std::vector<bool> discharges(num_evs, false);
  int n_vars = 0;
  int active_horizon = 0;
  for (int n = 0; n < num_evs; ++n) {
    const int k = tau_vector[n];
    if (k == 0) continue;
    discharges[n] = scenario.fleet[n].params.max_discharge_rate > 0.0;
    offset[n] = n_vars;
    n_vars += (discharges[n] ? 2 * k : k) + 1;
    active_horizon = std::max(active_horizon, k);
  }

  std::vector<Allocation> allocations(num_evs);
  for (int n = 0; n < num_evs; ++n) {
    allocations[n].disconnect_time = tau_vector[n];
    allocations[n].power_profile.assign(horizon, 0.0);
  }
  if (n_vars == 0) {
    return {allocations, social_cost(scenario, allocations)};
  }

  int m_rows = 2 * active_horizon;
  for (int n = 0; n < num_evs; ++n) {
    if (offset[n] < 0) continue;
    m_rows += (discharges[n] ? 6 : 4) * tau_vector[n] + 2;
  }

  qp::Problem p;
  p.P = Eigen::MatrixXd::Zero(n_vars, n_vars);
  p.q = Eigen::VectorXd::Zero(n_vars);
  p.A = Eigen::MatrixXd::Zero(m_rows, n_vars);
  p.b = Eigen::VectorXd::Zero(m_rows);

  int row = 0;
  for (int n = 0; n < num_evs; ++n) {
    if (offset[n] < 0) continue;
    const Ev& ev = scenario.fleet[n];
    const int k_active = tau_vector[n];
    const bool dis = discharges[n];
    const int iup = offset[n], iun = offset[n] + k_active;
    const int ig = offset[n] + (dis ? 2 : 1) * k_active;
    const double eta = ev.params.efficiency;

    p.P(ig, ig) = 2.0 * ev.type.soc_inflexibility;
    for (int k = 0; k < k_active; ++k) {
      p.q[iup + k] = dt * (ev.params.wear_cost + scenario.prices[k]);
      p.A(row, iup + k) = 1.0;  p.b[row++] = ev.params.max_charge_rate;
      p.A(row, iup + k) = -1.0; p.b[row++] = 0.0;
      if (dis) {
        p.q[iun + k] = dt * (ev.params.wear_cost - scenario.prices[k]);
        p.A(row, iun + k) = 1.0;  p.b[row++] = ev.params.max_discharge_rate;
        p.A(row, iun + k) = -1.0; p.b[row++] = 0.0;
      }
    }

    for (int j = 1; j <= k_active; ++j) {
      for (int k = 0; k < j; ++k) {
        p.A(row, iup + k) = eta * dt;
        if (dis) p.A(row, iun + k) = -eta * dt;
      }
      p.b[row++] = ev.params.battery_capacity - ev.params.initial_soc;
      for (int k = 0; k < j; ++k) {
        p.A(row, iup + k) = -eta * dt;
        if (dis) p.A(row, iun + k) = eta * dt;
      }
      p.b[row++] = ev.params.initial_soc;
    }

    p.A(row, ig) = -1.0; p.b[row++] = 0.0;
    p.A(row, ig) = -1.0;
    for (int k = 0; k < k_active; ++k) {
      p.A(row, iup + k) = -eta * dt;
      if (dis) p.A(row, iun + k) = eta * dt;
    }
    p.b[row++] = ev.params.initial_soc - ev.type.desired_soc;
  }

  // Two-sided bus limit wherever at least one EV is still connected.
  for (int t = 0; t < active_horizon; ++t) {
    for (int sign : {1, -1}) {
      for (int n = 0; n < num_evs; ++n) {
        if (offset[n] < 0 || t >= tau_vector[n]) continue;
        p.A(row, offset[n] + t) = sign;
        if (discharges[n]) p.A(row, offset[n] + tau_vector[n] + t) = -sign;
      }
      p.b[row++] = scenario.bus_capacity;
    }
  }

  qp::Settings settings;
  settings.gap_tolerance = tol;
  const qp::Solution sol = qp::solve(p, settings);

  for (int n = 0; n < num_evs; ++n) {
    if (offset[n] < 0) continue;
    const Ev& ev = scenario.fleet[n];
    for (int k = 0; k < tau_vector[n]; ++k) {
      double up = std::max(0.0, sol.x[offset[n] + k]);
      double un =
          discharges[n] ? std::max(0.0, sol.x[offset[n] + tau_vector[n] + k]) : 0.0;
      const double both = std::min(up, un);
      up -= both;
      un -= both;
      allocations[n].power_profile[k] =
          std::clamp(up - un, -ev.params.max_discharge_rate, ev.params.max_charge_rate);
    }
  }
  clamp_dust(scenario, allocations);

  return {allocations, social_cost(scenario, allocations)};
}

ScheduleSolution solve_exact(const StationScenario& scenario,
                             const std::vector<std::vector<int>>& tau_candidates_per_ev,
                             const ExactConfig& config) {
  scenario.validate();
  const int num_evs = scenario.num_evs();
  const int horizon = scenario.horizon;
  if (static_cast<int>(tau_candidates_per_ev.size()) != num_evs)
    throw InputError("exact: one candidate set per EV required");

  std::vector<std::vector<int>> candidates = tau_candidates_per_ev;
  long double product = 1.0L;
  for (int n = 0; n < num_evs; ++n) {
    auto& c = candidates[n];
    if (c.empty()) throw InputError("exact: empty candidate set");
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    for (int tau : c) {
      if (tau < 0 || tau > horizon) throw InputError("exact: tau candidate outside {0, ..., T}");
    }
    const int tau_d = scenario.fleet[n].type.desired_disconnect;
    std::stable_sort(c.begin(), c.end(), [tau_d](int a, int b) {
      const int da = std::abs(a - tau_d), db = std::abs(b - tau_d);
      return da != db ? da < db : a < b;
    });
    product *= static_cast<long double>(c.size());
  }
  if (product > static_cast<long double>(config.budget_guard)) {
    throw InputError("exact: enumeration of " + std::to_string(static_cast<double>(product)) +
                     " tau vectors exceeds the budget guard of " +
                     std::to_string(config.budget_guard));
  }

  const double dt = scenario.interval_hours;
  const auto delay_cost = [&](int n, int tau) {
    const double hours = (tau - scenario.fleet[n].type.desired_disconnect) * dt;
    return scenario.fleet[n].type.temporal_inflexibility * hours * hours;
  };

  int solves = 0;

  // Bound on the profile part of the cost: the most relaxed candidate vector
  // (profile costs only shrink as taus grow). Slightly deflated to absorb the
  // solver gap, since profit from discharging can make this bound negative.
  std::vector<int> relaxed(num_evs);
  for (int n = 0; n < num_evs; ++n) {
    relaxed[n] = *std::max_element(candidates[n].begin(), candidates[n].end());
  }
  const JointSolveResult relaxed_solution =
      solve_joint_fixed_tau(scenario, relaxed, config.qp_tolerance);
  ++solves;
  double profile_bound = relaxed_solution.social_cost;
  for (int n = 0; n < num_evs; ++n) profile_bound -= delay_cost(n, relaxed[n]);
  profile_bound -= config.qp_tolerance * (1.0 + std::abs(profile_bound)) + 1e-9;

  ScheduleSolution result;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<int> assignment(num_evs, 0);

  const auto recurse = [&](auto&& self, int depth, double delay_so_far) -> void {
    if (delay_so_far + profile_bound > best_cost) return;
    if (depth == num_evs) {
      const JointSolveResult leaf =
          solve_joint_fixed_tau(scenario, assignment, config.qp_tolerance);
      ++solves;
      // Near-ties keep the incumbent: depth-first order visits tau vectors by
      // preference, so this realizes the lexicographic-smallest-delay rule
      // without letting solver noise overturn it.
      const double tie = result.allocations.empty()
                             ? 0.0
                             : 1e-9 * (1.0 + std::abs(best_cost));
      if (leaf.social_cost < best_cost - tie) {
        best_cost = leaf.social_cost;
        result.allocations = leaf.allocations;
        result.social_cost = leaf.social_cost;
      }
      return;
    }
    for (int tau : candidates[depth]) {
      assignment[depth] = tau;
      self(self, depth + 1, delay_so_far + delay_cost(depth, tau));
    }
  };
  recurse(recurse, 0, 0.0);

  result.sweeps_used = solves;
  result.converged = true;
  double residual = 0.0;
  for (int t = 0; t < horizon; ++t) {
    double total = 0.0;
    for (const Allocation& a : result.allocations) total += a.power_profile[t];
    residual = std::max(residual, std::abs(total) - scenario.bus_capacity);
  }
  result.primal_residual = std::max(0.0, residual);
  return result;
}

ScheduleSolution solve_exact(const StationScenario& scenario, const ExactConfig& config) {
  std::vector<int> all(scenario.horizon + 1);
  std::iota(all.begin(), all.end(), 0);
  return solve_exact(scenario, std::vector<std::vector<int>>(scenario.fleet.size(), all), config);
}

}  // namespace v2g
