#include "v2g/subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "v2g/errors.hpp"
#include "v2g/qp.hpp"

namespace v2g {

namespace {

constexpr double kDustPower = 1e-5;  // kW; flows below this are solver noise

void check_context(const Ev& ev, const SubproblemContext& ctx) {
  const std::size_t horizon = ctx.prices.size();
  if (ctx.other_load.size() != horizon || ctx.duals.multipliers.size() != horizon)
    throw InputError("subproblem: context vectors must all have length T");
  if (ctx.interval_hours <= 0.0) throw InputError("subproblem: interval_hours must be > 0");
  if (ctx.bus_capacity <= 0.0) throw InputError("subproblem: bus_capacity must be > 0");
  if (ctx.duals.penalty <= 0.0) throw InputError("subproblem: penalty must be > 0");
  ev.params.validate();
}

// Worst box violation of the SoC trajectory under `profile`.
double soc_violation(const Ev& ev, std::span<const double> profile, double dt) {
  double soc = ev.params.initial_soc;
  double worst = 0.0;
  for (double u : profile) {
    soc += ev.params.efficiency * u * dt;
    worst = std::max({worst, -soc, soc - ev.params.battery_capacity});
  }
  return worst;
}

}  // namespace

double augmented_objective(const Ev& ev, int tau, std::span<const double> profile,
                           const SubproblemContext& ctx) {
  const int horizon = static_cast<int>(ctx.prices.size());
  if (static_cast<int>(profile.size()) != horizon)
    throw InputError("subproblem: profile length must equal T");

  Allocation alloc{tau, {profile.begin(), profile.end()}};
  double value = ev_cost(ev.params, ev.type, alloc, ctx.interval_hours) +
                 energy_cost(ctx.prices, profile, ctx.interval_hours);

  const double nu = ctx.duals.penalty;
  for (int t = 0; t < horizon; ++t) {
    const double lambda = ctx.duals.multipliers[t];
    value -= lambda * lambda / (2.0 * nu);
    const double hinge =
        lambda + nu * (std::abs(profile[t] + ctx.other_load[t]) - ctx.bus_capacity);
    if (hinge > 0.0) value += hinge * hinge / (2.0 * nu);
  }
  return value;
}

FixedTauResult solve_fixed_tau(const Ev& ev, int tau, const SubproblemContext& ctx, double tol) {
  check_context(ev, ctx);
  const int horizon = static_cast<int>(ctx.prices.size());
  if (tau < 0 || tau > horizon) throw InputError("subproblem: tau must lie in {0, ..., T}");

  std::vector<double> profile(horizon, 0.0);
  if (tau == 0) {
    return {profile, augmented_objective(ev, tau, profile, ctx)};
  }

  // Variable layout: charge split u+ (K), discharge split u- (K, omitted
  // entirely for discharge-incapable EVs), bus-flow epigraph y (K), hinge
  // epigraph m (K), shortfall slack g. K = tau.
  const int K = tau;
  const bool can_discharge = ev.params.max_discharge_rate > 0.0;
  const int D = can_discharge ? K : 0;
  const int iup = 0, iun = K, iy = K + D, im = iy + K, ig = im + K;
  const int n = 3 * K + D + 1;
  const int m_rows = 8 * K + 2 * D + 2;

  const double dt = ctx.interval_hours;
  const double nu = ctx.duals.penalty;
  const double eta = ev.params.efficiency;
  const double cap = ctx.bus_capacity;

  qp::Problem p;
  p.P = Eigen::MatrixXd::Zero(n, n);
  p.q = Eigen::VectorXd::Zero(n);
  p.A = Eigen::MatrixXd::Zero(m_rows, n);
  p.b = Eigen::VectorXd::Zero(m_rows);

  for (int k = 0; k < K; ++k) {
    p.P(im + k, im + k) = 1.0 / nu;                      // m_k^2 / (2 nu)
    p.q[iup + k] = dt * (ev.params.wear_cost + ctx.prices[k]);
    if (can_discharge) p.q[iun + k] = dt * (ev.params.wear_cost - ctx.prices[k]);
  }
  p.P(ig, ig) = 2.0 * ev.type.soc_inflexibility;  // beta g^2

  int row = 0;
  for (int k = 0; k < K; ++k) {
    p.A(row, iup + k) = 1.0;  p.b[row++] = ev.params.max_charge_rate;
    p.A(row, iup + k) = -1.0; p.b[row++] = 0.0;
    if (can_discharge) {
      p.A(row, iun + k) = 1.0;  p.b[row++] = ev.params.max_discharge_rate;
      p.A(row, iun + k) = -1.0; p.b[row++] = 0.0;
    }

    // y_k >= |u_k + other_load_k|
    p.A(row, iup + k) = 1.0;
    if (can_discharge) p.A(row, iun + k) = -1.0;
    p.A(row, iy + k) = -1.0;
    p.b[row++] = -ctx.other_load[k];
    p.A(row, iup + k) = -1.0;
    if (can_discharge) p.A(row, iun + k) = 1.0;
    p.A(row, iy + k) = -1.0;
    p.b[row++] = ctx.other_load[k];

    // m_k >= 0 and m_k >= lambda_k + nu (y_k - C)
    p.A(row, im + k) = -1.0; p.b[row++] = 0.0;
    p.A(row, iy + k) = nu; p.A(row, im + k) = -1.0;
    p.b[row++] = nu * cap - ctx.duals.multipliers[k];
  }

  // SoC box along the trajectory: prefix sums of eta dt (u+ - u-).
  for (int j = 1; j <= K; ++j) {
    for (int k = 0; k < j; ++k) {
      p.A(row, iup + k) = eta * dt;
      if (can_discharge) p.A(row, iun + k) = -eta * dt;
    }
    p.b[row++] = ev.params.battery_capacity - ev.params.initial_soc;
    for (int k = 0; k < j; ++k) {
      p.A(row, iup + k) = -eta * dt;
      if (can_discharge) p.A(row, iun + k) = eta * dt;
    }
    p.b[row++] = ev.params.initial_soc;
  }

  // g >= 0 and g >= desired_soc - s[T]
  p.A(row, ig) = -1.0; p.b[row++] = 0.0;
  p.A(row, ig) = -1.0;
  for (int k = 0; k < K; ++k) {
    p.A(row, iup + k) = -eta * dt;
    if (can_discharge) p.A(row, iun + k) = eta * dt;
  }
  p.b[row++] = ev.params.initial_soc - ev.type.desired_soc;

  qp::Settings settings;
  settings.gap_tolerance = tol;
  const qp::Solution sol = qp::solve(p, settings);

  double raw_complementarity = 0.0;
  for (int k = 0; k < K; ++k) {
    double up = std::max(0.0, sol.x[iup + k]);
    double un = can_discharge ? std::max(0.0, sol.x[iun + k]) : 0.0;
    const double both = std::min(up, un);  // simultaneous charge/discharge never pays
    raw_complementarity = std::max(raw_complementarity, both);
    up -= both;
    un -= both;
    profile[k] = std::clamp(up - un, -ev.params.max_discharge_rate, ev.params.max_charge_rate);
  }

  // Zero out sub-dust flows unless that would worsen a SoC boundary ride.
  std::vector<double> clamped = profile;
  for (double& u : clamped) {
    if (std::abs(u) < kDustPower) u = 0.0;
  }
  if (soc_violation(ev, clamped, dt) <= soc_violation(ev, profile, dt) + 1e-12) {
    profile = std::move(clamped);
  }

  return {profile, augmented_objective(ev, tau, profile, ctx), raw_complementarity};
}

EvSubproblemResult solve_ev_subproblem(const Ev& ev, const SubproblemContext& ctx,
                                       std::span<const int> tau_candidates, double tol) {
  check_context(ev, ctx);
  const int horizon = static_cast<int>(ctx.prices.size());
  if (tau_candidates.empty()) throw InputError("subproblem: tau_candidates must be nonempty");

  std::vector<int> candidates(tau_candidates.begin(), tau_candidates.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (int tau : candidates) {
    if (tau < 0 || tau > horizon)
      throw InputError("subproblem: tau candidate outside {0, ..., T}");
  }

  const double dt = ctx.interval_hours;
  const double alpha = ev.type.temporal_inflexibility;
  const auto delay_cost = [&](int tau) {
    const double hours = (tau - ev.type.desired_disconnect) * dt;
    return alpha * hours * hours;
  };

  // The profile part of the objective is nonincreasing in tau (larger tau
  // only relaxes the feasible set), so the most relaxed candidate yields a
  // lower bound that makes the delay term a valid pruning test.
  const int tau_max = candidates.back();
  std::map<int, FixedTauResult> solved;
  solved.emplace(tau_max, solve_fixed_tau(ev, tau_max, ctx, tol));
  double profile_lb = solved.at(tau_max).objective - delay_cost(tau_max);
  profile_lb -= tol * (1.0 + std::abs(profile_lb)) + 1e-9;  // absorb the solver gap

  // Preference order: closest to the desired time first, then smaller tau.
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    const int da = std::abs(a - ev.type.desired_disconnect);
    const int db = std::abs(b - ev.type.desired_disconnect);
    return da != db ? da < db : a < b;
  });

  EvSubproblemResult best;
  bool have_best = false;
  for (int tau : candidates) {
    if (have_best && delay_cost(tau) + profile_lb > best.objective) continue;
    auto it = solved.find(tau);
    if (it == solved.end()) {
      it = solved.emplace(tau, solve_fixed_tau(ev, tau, ctx, tol)).first;
    }
    if (!have_best || it->second.objective < best.objective) {
      best = {tau, it->second.profile, it->second.objective};
      have_best = true;
    }
  }
  return best;
}

}  // namespace v2g
