#pragma once

#include <random>
#include <string>
#include <vector>

#include "v2g/model.hpp"

namespace testutil {

inline std::string fixture(const std::string& relative) {
  return std::string(V2G_FIXTURE_DIR) + "/" + relative;
}

inline v2g::Ev make_ev(double capacity, double efficiency, double wear, double initial,
                       double charge_rate, double discharge_rate, int tau_d, double soc_d,
                       double alpha, double beta) {
  v2g::Ev ev;
  ev.params = {capacity, efficiency, wear, initial, charge_rate, discharge_rate};
  ev.type = {tau_d, soc_d, alpha, beta};
  return ev;
}

// Valid-by-construction random scenario for property tests: moderate fleets,
// mixed congestion, volatile-ish prices.
inline v2g::StationScenario random_scenario(std::uint64_t seed, int num_evs, int horizon,
                                            double interval_hours = 0.5) {
  std::mt19937_64 rng(seed);
  const auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };

  v2g::StationScenario scenario;
  scenario.horizon = horizon;
  scenario.interval_hours = interval_hours;
  for (int t = 0; t < horizon; ++t) scenario.prices.push_back(uniform(0.10, 0.25));

  double total_rate = 0.0;
  for (int n = 0; n < num_evs; ++n) {
    const double capacity = uniform(20.0, 50.0);
    const double initial = uniform(0.1, 0.6) * capacity;
    const double desired = std::min(capacity, initial + uniform(0.0, 0.5) * capacity);
    const double rate = uniform(3.0, 8.0);
    v2g::Ev ev = make_ev(capacity, uniform(0.8, 1.0), uniform(0.0, 0.2), initial, rate,
                         uniform(0.0, rate), static_cast<int>(rng() % (horizon + 1)), desired,
                         uniform(0.0, 40.0), uniform(0.5, 12.0));
    total_rate += rate;
    scenario.fleet.push_back(std::move(ev));
  }
  scenario.bus_capacity = std::max(1.0, uniform(0.4, 1.2) * total_rate);
  scenario.validate();
  return scenario;
}

}  // namespace testutil
