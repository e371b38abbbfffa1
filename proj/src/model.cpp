#include "v2g/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "v2g/errors.hpp"

namespace v2g {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw InputError(message);
}

}  // namespace

void EvStaticParams::validate() const {
  require(battery_capacity > 0.0, "battery_capacity must be > 0");
  require(efficiency >= 0.0 && efficiency <= 1.0, "efficiency must lie in [0, 1]");
  require(wear_cost >= 0.0, "wear_cost must be >= 0");
  require(initial_soc >= 0.0 && initial_soc <= battery_capacity,
          "initial_soc must lie in [0, battery_capacity]");
  require(max_charge_rate > 0.0, "max_charge_rate must be > 0");
  require(max_discharge_rate >= 0.0, "max_discharge_rate must be >= 0");
}

void EvType::validate(const EvStaticParams& params, int horizon) const {
  require(desired_disconnect >= 0 && desired_disconnect <= horizon,
          "desired_disconnect must lie in {0, ..., T}");
  require(desired_soc >= 0.0 && desired_soc <= params.battery_capacity,
          "desired_soc must lie in [0, battery_capacity]");
  require(temporal_inflexibility >= 0.0, "temporal_inflexibility must be >= 0");
  require(soc_inflexibility >= 0.0, "soc_inflexibility must be >= 0");
}

void StationScenario::validate() const {
  require(horizon >= 1, "horizon must be >= 1");
  require(interval_hours > 0.0, "interval_hours must be > 0");
  require(static_cast<int>(prices.size()) == horizon,
          "prices must have exactly horizon entries");
  require(bus_capacity > 0.0, "bus_capacity must be > 0");
  require(!fleet.empty(), "fleet must contain at least one EV");
  for (const Ev& ev : fleet) {
    ev.params.validate();
    ev.type.validate(ev.params, horizon);
  }
}

std::string to_string(ConstraintId id) {
  switch (id) {
    case ConstraintId::kRate: return "rate";
    case ConstraintId::kSocBox: return "soc_box";
    case ConstraintId::kPostDisconnect: return "post_disconnect";
    case ConstraintId::kBus: return "bus";
  }
  return "unknown";
}

std::vector<double> soc_trajectory(const EvStaticParams& params, std::span<const double> profile,
                                   double interval_hours) {
  require(interval_hours > 0.0, "interval_hours must be > 0");
  std::vector<double> soc(profile.size() + 1);
  soc[0] = params.initial_soc;
  for (std::size_t t = 0; t < profile.size(); ++t) {
    soc[t + 1] = soc[t] + params.efficiency * profile[t] * interval_hours;
  }
  return soc;
}

double ev_cost(const EvStaticParams& params, const EvType& type, const Allocation& alloc,
               double interval_hours) {
  const std::vector<double> soc = soc_trajectory(params, alloc.power_profile, interval_hours);
  const double delay_hours = (alloc.disconnect_time - type.desired_disconnect) * interval_hours;
  const double shortfall = std::max(0.0, type.desired_soc - soc.back());
  double transferred = 0.0;
  for (double u : alloc.power_profile) transferred += std::abs(u);
  return type.temporal_inflexibility * delay_hours * delay_hours +
         type.soc_inflexibility * shortfall * shortfall +
         params.wear_cost * transferred * interval_hours;
}

double energy_cost(std::span<const double> prices, std::span<const double> profile,
                   double interval_hours) {
  require(prices.size() == profile.size(), "prices and profile must have equal length");
  double total = 0.0;
  for (std::size_t t = 0; t < prices.size(); ++t) {
    total += prices[t] * profile[t] * interval_hours;
  }
  return total;
}

double social_cost(const StationScenario& scenario, const std::vector<Allocation>& allocations) {
  require(allocations.size() == scenario.fleet.size(),
          "one allocation per fleet member required");
  double total = 0.0;
  for (std::size_t n = 0; n < scenario.fleet.size(); ++n) {
    const Ev& ev = scenario.fleet[n];
    total += ev_cost(ev.params, ev.type, allocations[n], scenario.interval_hours);
    total += energy_cost(scenario.prices, allocations[n].power_profile, scenario.interval_hours);
  }
  return total;
}

FeasibilityReport check_feasible(const StationScenario& scenario,
                                 const std::vector<Allocation>& allocations, double tolerance) {
  require(allocations.size() == scenario.fleet.size(),
          "one allocation per fleet member required");
  FeasibilityReport report;
  const int num_evs = scenario.num_evs();
  const int horizon = scenario.horizon;

  for (int n = 0; n < num_evs; ++n) {
    const Ev& ev = scenario.fleet[n];
    const Allocation& alloc = allocations[n];
    require(static_cast<int>(alloc.power_profile.size()) == horizon,
            "power profile length must equal the horizon");

    for (int t = 0; t < horizon; ++t) {
      const double u = alloc.power_profile[t];
      const double over_charge = u - ev.params.max_charge_rate;
      const double over_discharge = -u - ev.params.max_discharge_rate;
      if (over_charge > tolerance) {
        report.violations.push_back({ConstraintId::kRate, n, t, over_charge});
      } else if (over_discharge > tolerance) {
        report.violations.push_back({ConstraintId::kRate, n, t, over_discharge});
      }
      if (t >= alloc.disconnect_time && std::abs(u) > tolerance) {
        report.violations.push_back({ConstraintId::kPostDisconnect, n, t, std::abs(u)});
      }
    }

    const std::vector<double> soc =
        soc_trajectory(ev.params, alloc.power_profile, scenario.interval_hours);
    for (int t = 0; t <= horizon; ++t) {
      const double under = -soc[t];
      const double over = soc[t] - ev.params.battery_capacity;
      if (under > tolerance) {
        report.violations.push_back({ConstraintId::kSocBox, n, t, under});
      } else if (over > tolerance) {
        report.violations.push_back({ConstraintId::kSocBox, n, t, over});
      }
    }
  }

  for (int t = 0; t < horizon; ++t) {
    double total = 0.0;
    for (int n = 0; n < num_evs; ++n) total += allocations[n].power_profile[t];
    const double excess = std::abs(total) - scenario.bus_capacity;
    if (excess > tolerance) {
      report.violations.push_back({ConstraintId::kBus, -1, t, excess});
    }
  }
  return report;
}

std::vector<Allocation> naive_parallel_schedule(const StationScenario& scenario) {
  scenario.validate();
  const int num_evs = scenario.num_evs();
  const int horizon = scenario.horizon;
  const double dt = scenario.interval_hours;

  std::vector<Allocation> allocations(num_evs);
  for (int n = 0; n < num_evs; ++n) {
    allocations[n].power_profile.assign(horizon, 0.0);
  }

  std::vector<double> soc(num_evs);
  std::vector<int> last_active(num_evs, -1);
  for (int n = 0; n < num_evs; ++n) soc[n] = scenario.fleet[n].params.initial_soc;

  for (int t = 0; t < horizon; ++t) {
    // EVs still short of their target; each capped by its rate and the energy
    // actually missing, so nobody overshoots desired_soc or the battery.
    std::vector<int> active;
    std::vector<double> cap(num_evs, 0.0);
    for (int n = 0; n < num_evs; ++n) {
      const Ev& ev = scenario.fleet[n];
      const double target = std::min(ev.type.desired_soc, ev.params.battery_capacity);
      const double missing = target - soc[n];
      if (missing <= 1e-12 || ev.params.efficiency <= 0.0) continue;
      cap[n] = std::min(ev.params.max_charge_rate, missing / (ev.params.efficiency * dt));
      active.push_back(n);
    }
    if (active.empty()) break;

    double rate_sum = 0.0;
    for (int n : active) rate_sum += scenario.fleet[n].params.max_charge_rate;
    double budget = std::min(scenario.bus_capacity, rate_sum);

    // Equal shares, re-divided as EVs hit their caps.
    std::vector<int> open = active;
    while (budget > 1e-12 && !open.empty()) {
      const double share = budget / static_cast<double>(open.size());
      bool capped_someone = false;
      std::vector<int> still_open;
      for (int n : open) {
        const double already = allocations[n].power_profile[t];
        const double room = cap[n] - already;
        if (room <= share + 1e-12) {
          allocations[n].power_profile[t] = cap[n];
          budget -= room;
          capped_someone = true;
        } else {
          still_open.push_back(n);
        }
      }
      if (!capped_someone) {
        for (int n : still_open) allocations[n].power_profile[t] += share;
        budget = 0.0;
      }
      open = std::move(still_open);
    }

    for (int n : active) {
      const double u = allocations[n].power_profile[t];
      if (u > 0.0) {
        soc[n] += scenario.fleet[n].params.efficiency * u * dt;
        last_active[n] = t;
      }
    }
  }

  for (int n = 0; n < num_evs; ++n) {
    const int charge_end = last_active[n] + 1;  // first interval with no charging left
    allocations[n].disconnect_time =
        std::max(scenario.fleet[n].type.desired_disconnect, charge_end);
  }
  return allocations;
}

}  // namespace v2g
