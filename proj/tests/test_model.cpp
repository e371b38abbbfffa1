#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "helpers.hpp"
#include "v2g/errors.hpp"
#include "v2g/model.hpp"

using namespace v2g;
using testutil::make_ev;

TEST_CASE("soc_trajectory: zero profile stays at the initial SoC") {
  const Ev ev = make_ev(40, 0.87, 0.13, 12.5, 6.6, 6.6, 4, 30, 31, 10);
  const std::vector<double> profile(8, 0.0);
  for (double soc : soc_trajectory(ev.params, profile, 0.25)) CHECK(soc == 12.5);
}

TEST_CASE("soc_trajectory: one interval at 6.6 kW with efficiency 0.87") {
  const Ev ev = make_ev(40, 0.87, 0.13, 10.0, 6.6, 6.6, 1, 30, 31, 10);
  const std::vector<double> profile{6.6};
  const auto soc = soc_trajectory(ev.params, profile, 1.0);
  CHECK(soc[1] == doctest::Approx(15.742).epsilon(1e-12));
}

TEST_CASE("soc_trajectory: matches an independent step-by-step recomputation") {
  std::mt19937_64 rng(7);
  const Ev ev = make_ev(60, 0.91, 0.1, 22, 7, 5, 4, 40, 31, 10);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> profile(8);
    for (double& u : profile) u = -5.0 + 12.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    const auto soc = soc_trajectory(ev.params, profile, 0.25);
    double expected = 22.0;
    CHECK(soc[0] == expected);
    for (int t = 0; t < 8; ++t) {
      expected += 0.91 * profile[t] * 0.25;
      CHECK(soc[t + 1] == doctest::Approx(expected).epsilon(1e-14));
    }
  }
}

TEST_CASE("soc_trajectory is affine in the profile") {
  std::mt19937_64 rng(11);
  const auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  const Ev ev = make_ev(50, 0.87, 0.0, 20, 10, 10, 0, 20, 0, 0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> u1(6), u2(6), mix(6);
    const double a = 4.0 * uniform() - 2.0, b = 4.0 * uniform() - 2.0;
    for (int t = 0; t < 6; ++t) {
      u1[t] = 10.0 * uniform() - 5.0;
      u2[t] = 10.0 * uniform() - 5.0;
      mix[t] = a * u1[t] + b * u2[t];
    }
    const auto s1 = soc_trajectory(ev.params, u1, 0.5);
    const auto s2 = soc_trajectory(ev.params, u2, 0.5);
    const auto sm = soc_trajectory(ev.params, mix, 0.5);
    for (int t = 0; t <= 6; ++t) {
      const double expected = a * (s1[t] - 20.0) + b * (s2[t] - 20.0);
      CHECK(sm[t] - 20.0 == doctest::Approx(expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("ev_cost: on-time full charge with no power costs nothing") {
  const Ev ev = make_ev(40, 0.87, 0.13, 30, 6.6, 6.6, 4, 25, 31, 10);
  const Allocation alloc{4, std::vector<double>(8, 0.0)};
  CHECK(ev_cost(ev.params, ev.type, alloc, 0.25) == 0.0);
}

TEST_CASE("ev_cost: a one-hour delay costs exactly alpha") {
  const Ev ev = make_ev(40, 0.87, 0.0, 30, 6.6, 6.6, 0, 20, 31, 10);
  const Allocation alloc{4, std::vector<double>(8, 0.0)};  // 4 x 15 min = 1 h late
  CHECK(ev_cost(ev.params, ev.type, alloc, 0.25) == doctest::Approx(31.0).epsilon(1e-12));
}

TEST_CASE("ev_cost: hand-evaluated delay + shortfall + wear case") {
  // alpha 2, beta 3, wear 0.13, dt 0.25 h, two intervals late, 1 kWh short,
  // |u|_1 = 8 kW: 2*(0.5)^2 + 3*1 + 0.13*8*0.25 = 3.76.
  const Ev ev = make_ev(40, 0.9, 0.13, 10, 6.6, 6.6, 1, 11, 2, 3);
  Allocation alloc{3, {4.0, -4.0, 0.0, 0.0}};
  CHECK(ev_cost(ev.params, ev.type, alloc, 0.25) == doctest::Approx(3.76).epsilon(1e-12));
}

TEST_CASE("ev_cost: nonnegative, hinged in the final SoC") {
  const Ev ev = make_ev(40, 1.0, 0.0, 10, 10, 0, 0, 14, 0, 5);
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 8; ++k) {
    Allocation alloc{1, {static_cast<double>(k)}};  // s[T] = 10 + k
    const double cost = ev_cost(ev.params, ev.type, alloc, 1.0);
    CHECK(cost >= 0.0);
    CHECK(cost <= previous + 1e-12);
    if (10 + k >= 14) CHECK(cost == 0.0);
    previous = cost;
  }
}

TEST_CASE("energy_cost: examples and the dot-product oracle") {
  CHECK(energy_cost(std::vector<double>{0.2, 0.3}, std::vector<double>{0.0, 0.0}, 0.5) == 0.0);

  const std::vector<double> flat(4, 0.13), charge(4, 6.6);
  CHECK(energy_cost(flat, charge, 0.25) == doctest::Approx(0.858).epsilon(1e-12));

  std::mt19937_64 rng(3);
  const auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<double> prices(6), profile(6);
  for (int t = 0; t < 6; ++t) {
    prices[t] = 0.05 + 0.3 * uniform();
    profile[t] = 12.0 * uniform() - 6.0;
  }
  double expected = 0.0;
  for (int t = 0; t < 6; ++t) expected += prices[t] * profile[t] * 0.25;
  CHECK(energy_cost(prices, profile, 0.25) == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(energy_cost(prices, std::vector<double>(5, 0.0), 0.25), InputError);
}

TEST_CASE("social_cost sums independent per-EV evaluations") {
  StationScenario scenario = testutil::random_scenario(21, 2, 6);
  std::vector<Allocation> allocations;
  for (const Ev& ev : scenario.fleet) {
    Allocation a{scenario.horizon, std::vector<double>(scenario.horizon, 0.0)};
    for (int t = 0; t < scenario.horizon; ++t) {
      a.power_profile[t] = std::min(ev.params.max_charge_rate, 2.0) * (t % 2 == 0 ? 1.0 : 0.0);
    }
    allocations.push_back(std::move(a));
  }

  double expected = 0.0;
  for (std::size_t n = 0; n < allocations.size(); ++n) {
    expected += ev_cost(scenario.fleet[n].params, scenario.fleet[n].type, allocations[n],
                        scenario.interval_hours);
    expected += energy_cost(scenario.prices, allocations[n].power_profile,
                            scenario.interval_hours);
  }
  CHECK(social_cost(scenario, allocations) == doctest::Approx(expected).epsilon(1e-12));

  // Reordering the fleet together with the allocations changes nothing.
  StationScenario permuted = scenario;
  std::swap(permuted.fleet[0], permuted.fleet[1]);
  std::vector<Allocation> swapped{allocations[1], allocations[0]};
  CHECK(social_cost(permuted, swapped) == doctest::Approx(social_cost(scenario, allocations)));

  CHECK_THROWS_AS(social_cost(scenario, {allocations[0]}), InputError);
}

TEST_CASE("check_feasible: clean schedules and constructed violations") {
  StationScenario scenario;
  scenario.horizon = 4;
  scenario.interval_hours = 0.25;
  scenario.prices = {0.1, 0.1, 0.1, 0.1};
  scenario.bus_capacity = 10.0;
  scenario.fleet = {make_ev(40, 0.9, 0.1, 20, 6.6, 6.6, 4, 25, 31, 10),
                    make_ev(40, 0.9, 0.1, 20, 6.6, 6.6, 4, 25, 31, 10)};

  std::vector<Allocation> zeros{{4, std::vector<double>(4, 0.0)},
                                {4, std::vector<double>(4, 0.0)}};
  CHECK(check_feasible(scenario, zeros).ok());

  SUBCASE("rate violation") {
    auto allocations = zeros;
    allocations[0].power_profile[2] = 7.6;  // 1 kW over the charge rate
    const auto report = check_feasible(scenario, allocations);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].constraint == ConstraintId::kRate);
    CHECK(report.violations[0].ev == 0);
    CHECK(report.violations[0].time == 2);
    CHECK(report.violations[0].magnitude == doctest::Approx(1.0));
  }

  SUBCASE("post-disconnect violation") {
    auto allocations = zeros;
    allocations[1].disconnect_time = 1;
    allocations[1].power_profile[2] = 1.0;
    const auto report = check_feasible(scenario, allocations);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].constraint == ConstraintId::kPostDisconnect);
  }

  SUBCASE("soc box violation") {
    auto allocations = zeros;
    allocations[0].power_profile = {6.0, 6.0, 6.0, 6.0};  // ends at 25.4 on a 24 kWh pack
    StationScenario small = scenario;
    small.fleet[0].params.battery_capacity = 24.0;
    small.fleet[0].type.desired_soc = 24.0;
    small.bus_capacity = 100.0;
    const auto report = check_feasible(small, allocations);
    REQUIRE(!report.violations.empty());
    CHECK(report.violations[0].constraint == ConstraintId::kSocBox);
  }

  SUBCASE("bus violations at every active interval") {
    std::vector<Allocation> full{{4, std::vector<double>(4, 6.6)},
                                 {4, std::vector<double>(4, 6.6)}};
    const auto report = check_feasible(scenario, full);
    int bus_count = 0;
    for (const Violation& v : report.violations) {
      if (v.constraint == ConstraintId::kBus) {
        ++bus_count;
        CHECK(v.magnitude == doctest::Approx(13.2 - 10.0));
      }
    }
    CHECK(bus_count == 4);
  }
}

TEST_CASE("naive_parallel_schedule: single EV charges four intervals then stops") {
  StationScenario scenario;
  scenario.horizon = 8;
  scenario.interval_hours = 0.25;
  scenario.prices.assign(8, 0.2);
  scenario.bus_capacity = 15.0;
  scenario.fleet = {make_ev(40, 1.0, 0.13, 10.0, 6.6, 6.6, 2, 16.6, 31, 10)};

  const auto allocations = naive_parallel_schedule(scenario);
  for (int t = 0; t < 4; ++t) CHECK(allocations[0].power_profile[t] == doctest::Approx(6.6));
  for (int t = 4; t < 8; ++t) CHECK(allocations[0].power_profile[t] == 0.0);
  CHECK(allocations[0].disconnect_time == 4);  // max(desired 2, charging end 4)
  CHECK(check_feasible(scenario, allocations).ok());
}

TEST_CASE("naive_parallel_schedule: an already-full EV does nothing") {
  StationScenario scenario;
  scenario.horizon = 4;
  scenario.interval_hours = 0.25;
  scenario.prices.assign(4, 0.2);
  scenario.bus_capacity = 15.0;
  scenario.fleet = {make_ev(40, 0.87, 0.13, 35.0, 6.6, 6.6, 3, 30.0, 31, 10)};

  const auto allocations = naive_parallel_schedule(scenario);
  for (double u : allocations[0].power_profile) CHECK(u == 0.0);
  CHECK(allocations[0].disconnect_time == 3);
}

TEST_CASE("naive_parallel_schedule: five EVs share a 15 kW bus equally") {
  StationScenario scenario;
  scenario.horizon = 12;
  scenario.interval_hours = 0.25;
  scenario.prices.assign(12, 0.2);
  scenario.bus_capacity = 15.0;
  for (int n = 0; n < 5; ++n) {
    scenario.fleet.push_back(make_ev(40, 0.87, 0.13, 5.0, 6.6, 6.6, 10, 35.0, 31, 10));
  }
  const auto allocations = naive_parallel_schedule(scenario);
  for (int n = 0; n < 5; ++n) CHECK(allocations[n].power_profile[0] == doctest::Approx(3.0));
}

TEST_CASE("naive_parallel_schedule is feasible on random scenarios") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const StationScenario scenario = testutil::random_scenario(seed, 1 + seed % 5, 6 + seed % 7);
    const auto allocations = naive_parallel_schedule(scenario);
    const auto report = check_feasible(scenario, allocations);
    CAPTURE(seed);
    CHECK(report.ok());
    for (std::size_t n = 0; n < allocations.size(); ++n) {
      CHECK(allocations[n].disconnect_time >= scenario.fleet[n].type.desired_disconnect);
      for (double u : allocations[n].power_profile) CHECK(u >= 0.0);
    }
  }
}

TEST_CASE("invariant validation rejects bad inputs") {
  EvStaticParams params{40, 0.87, 0.13, 10, 6.6, 6.6};
  CHECK_NOTHROW(params.validate());
  params.efficiency = 1.2;
  CHECK_THROWS_AS(params.validate(), InputError);

  StationScenario scenario = testutil::random_scenario(5, 2, 4);
  scenario.prices.pop_back();
  CHECK_THROWS_AS(scenario.validate(), InputError);
}
