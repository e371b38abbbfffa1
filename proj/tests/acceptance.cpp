// Acceptance suite: runs every acceptance criterion at its pinned tolerance
// and prints one PASS/FAIL line per criterion. Exit code = number of fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "v2g/admm.hpp"
#include "v2g/errors.hpp"
#include "v2g/exact.hpp"
#include "v2g/io.hpp"
#include "v2g/mechanism.hpp"
#include "v2g/model.hpp"
#include "v2g/sim.hpp"
#include "v2g/subproblem.hpp"

using namespace v2g;

namespace {

std::string fixture(const std::string& relative) {
  return std::string(V2G_FIXTURE_DIR) + "/" + relative;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

Ev make_ev(double capacity, double efficiency, double wear, double initial, double rate,
           int tau_d, double soc_d, double alpha, double beta) {
  Ev ev;
  ev.params = {capacity, efficiency, wear, initial, rate, rate};
  ev.type = {tau_d, soc_d, alpha, beta};
  return ev;
}

// Seeded distribution for the optimality-gap suite: small fleets, binding
// bus, volatile prices, mixed wear levels.
StationScenario gap_instance(int index) {
  std::mt19937_64 rng(1000 + index);
  StationScenario scenario;
  const int num_evs = 2 + index % 2;
  scenario.horizon = (index / 2) % 2 == 0 ? 8 : 12;
  scenario.interval_hours = 0.5;
  for (int t = 0; t < scenario.horizon; ++t) {
    const double phase = static_cast<double>(t) / scenario.horizon;
    const double dip = std::exp(-40.0 * (phase - 0.25) * (phase - 0.25));
    const double peak = std::exp(-40.0 * (phase - 0.65) * (phase - 0.65));
    scenario.prices.push_back(0.16 - 0.03 * dip + 0.06 * peak + uniform(rng, -0.004, 0.004));
  }
  const double wear = index % 4 == 3 ? 0.03 : 0.13;
  for (int n = 0; n < num_evs; ++n) {
    const double initial = uniform(rng, 6.0, 12.0);
    const double gap = uniform(rng, 8.0, 14.0);
    const int tau_d = scenario.horizon / 2 +
                      static_cast<int>(rng() % static_cast<std::uint64_t>(scenario.horizon / 2));
    scenario.fleet.push_back(make_ev(40.0, 0.87, wear, initial, 6.6, tau_d, initial + gap,
                                     uniform(rng, 5.0, 35.0), 10.0));
  }
  scenario.bus_capacity = 0.55 * 6.6 * num_evs;
  scenario.validate();
  return scenario;
}

StationScenario misreport_toy(double alpha_first, double alpha_second) {
  StationScenario scenario;
  scenario.horizon = 8;
  scenario.interval_hours = 0.5;
  scenario.prices = {0.200, 0.196, 0.204, 0.198, 0.202, 0.194, 0.206, 0.199};
  scenario.bus_capacity = 6.6;
  scenario.fleet = {make_ev(40, 1.0, 0.01, 10, 6.6, 4, 19.9, alpha_first, 10),
                    make_ev(40, 1.0, 0.01, 10, 6.6, 4, 19.9, alpha_second, 10)};
  return scenario;
}

std::vector<EvType> truthful(const StationScenario& scenario) {
  std::vector<EvType> reports;
  for (const Ev& ev : scenario.fleet) reports.push_back(ev.type);
  return reports;
}

DatasetBundle t12_bundle(const std::string& soc_file) {
  DatasetPaths paths;
  paths.price_files = {fixture("prices/t12_volatile_a.csv"),
                       fixture("prices/t12_volatile_b.csv"),
                       fixture("prices/t12_volatile_c.csv")};
  paths.disconnect_file = fixture("datasets/disconnects_t12.csv");
  paths.soc_file = fixture("datasets/" + soc_file);
  paths.alpha_file = fixture("datasets/alpha_default.csv");
  return load_datasets(paths, 12);
}

int failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& detail) {
  std::printf("criterion %2d [%s] %s: %s\n", id, pass ? "PASS" : "FAIL", name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void guarded(int id, const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, name, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* format, ...) {
  char buffer[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buffer, sizeof(buffer), format, args);
  va_end(args);
  return buffer;
}

}  // namespace

int main() {
  std::vector<StationScenario> gap_suite;
  for (int i = 0; i < 20; ++i) gap_suite.push_back(gap_instance(i));
  std::vector<ScheduleSolution> exact_solutions(20);

  // 1. ADMM optimality gap against the exact oracle.
  guarded(1, "ADMM optimality gap", [&] {
    const auto start = std::chrono::steady_clock::now();
    double mean_gap = 0.0, max_gap = 0.0;
    for (int i = 0; i < 20; ++i) {
      const ScheduleSolution admm = run_admm(gap_suite[i]);
      exact_solutions[i] = solve_exact(gap_suite[i]);
      const double gap = admm.social_cost / exact_solutions[i].social_cost - 1.0;
      mean_gap += gap / 20.0;
      max_gap = std::max(max_gap, gap);
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = mean_gap <= 0.05 && max_gap <= 0.15 && seconds <= 60.0;
    report(1, pass, "ADMM optimality gap",
           fmt("mean %.2f%% (<=5%%), max %.2f%% (<=15%%), runtime %.1fs (<=60s), 20 instances",
               100.0 * mean_gap, 100.0 * max_gap, seconds));
  });

  // 2. Dominant-strategy incentive compatibility over the misreport grid.
  guarded(2, "DSIC grid test", [&] {
    const std::vector<std::pair<double, double>> alphas{
        {2.0, 5.0}, {5.0, 31.0}, {31.0, 33.0}, {10.0, 3.0}, {8.0, 8.0}};
    double worst_regret = -std::numeric_limits<double>::infinity();
    for (const auto& [a1, a2] : alphas) {
      const StationScenario toy = misreport_toy(a1, a2);
      for (int n = 0; n < 2; ++n) {
        const auto grid = default_misreport_grid(toy.fleet[n], toy.horizon);
        const auto surface = misreport_sweep(toy, n, grid, PaymentRule::kVcg);
        double truth_utility = std::numeric_limits<double>::quiet_NaN();
        for (const MisreportPoint& point : surface) {
          if (point.report.desired_disconnect == toy.fleet[n].type.desired_disconnect &&
              point.report.temporal_inflexibility ==
                  toy.fleet[n].type.temporal_inflexibility) {
            truth_utility = point.utility;
          }
        }
        for (const MisreportPoint& point : surface) {
          worst_regret = std::max(worst_regret, point.utility - truth_utility);
        }
      }
    }
    report(2, worst_regret <= 1e-4, "DSIC grid test",
           fmt("worst misreport advantage %.2e $ (<=1e-4), 5 toys x 2 EVs x 25 reports",
               worst_regret));
  });

  // 3. Without payments, overstating inflexibility pays.
  guarded(3, "misreport incentive without payments", [&] {
    const StationScenario toy = misreport_toy(2.0, 5.0);
    const auto grid = default_misreport_grid(toy.fleet[0], toy.horizon);
    const auto surface = misreport_sweep(toy, 0, grid, PaymentRule::kNone);
    double truth_utility = std::numeric_limits<double>::quiet_NaN();
    double best_overstated = -std::numeric_limits<double>::infinity();
    for (const MisreportPoint& point : surface) {
      if (point.report.desired_disconnect == toy.fleet[0].type.desired_disconnect &&
          point.report.temporal_inflexibility == toy.fleet[0].type.temporal_inflexibility) {
        truth_utility = point.utility;
      }
      if (point.report.temporal_inflexibility > toy.fleet[0].type.temporal_inflexibility) {
        best_overstated = std::max(best_overstated, point.utility);
      }
    }
    const double advantage = best_overstated - truth_utility;
    report(3, advantage >= 0.01, "misreport incentive without payments",
           fmt("overstating alpha gains %.3f $ (>=0.01)", advantage));
  });

  // 4. Individual rationality under truthful reports.
  guarded(4, "individual rationality", [&] {
    double worst_margin = std::numeric_limits<double>::infinity();
    int checked = 0;
    const auto check = [&](const StationScenario& scenario) {
      const MechanismOutcome outcome = run_vcg(scenario, truthful(scenario));
      for (int n = 0; n < scenario.num_evs(); ++n) {
        const Ev& ev = scenario.fleet[n];
        const double gap = ev.type.desired_soc - ev.params.initial_soc;
        const double floor = -ev.type.soc_inflexibility * gap * gap;
        worst_margin = std::min(worst_margin, outcome.utilities[n] - floor);
        ++checked;
      }
    };
    for (const StationScenario& scenario : gap_suite) check(scenario);
    for (const auto& [a1, a2] : std::vector<std::pair<double, double>>{
             {2.0, 5.0}, {5.0, 31.0}, {31.0, 33.0}, {10.0, 3.0}, {8.0, 8.0}}) {
      check(misreport_toy(a1, a2));
    }
    report(4, worst_margin >= -1e-6, "individual rationality",
           fmt("worst utility margin over the outside option %.2e $ (>=-1e-6), %d EVs",
               worst_margin, checked));
  });

  // 5. Table-I congestion pattern at wear 0.13 $/kWh.
  guarded(5, "Table-I congestion pattern", [&] {
    ExperimentConfig config;
    config.station.horizon = 12;
    config.station.interval_hours = 1.0;
    config.station.num_evs = 5;
    config.wear_grid = {0.13};
    config.bus_grid = {15.0, 10.0};
    config.runs = 5;
    config.seed = 7;
    config.solver.kind = SolverKind::kAdmm;
    const ExperimentResult result = run_experiment(t12_bundle("soc_hungry.csv"), config);

    const GridPointResult& regular = result.points[0];   // 15 kW
    const GridPointResult& congested = result.points[1]; // 10 kW
    bool pass = congested.avg_delay_min.mean > 0.0;
    double v2g_worst = 0.0;
    for (const RunMetrics& run : regular.runs) {
      pass = pass && run.avg_delay_min == 0.0;
      v2g_worst = std::max(v2g_worst, run.v2g_energy_kwh);
    }
    for (const RunMetrics& run : congested.runs) {
      v2g_worst = std::max(v2g_worst, run.v2g_energy_kwh);
    }
    pass = pass && v2g_worst <= 1e-6;
    report(5, pass, "Table-I congestion pattern",
           fmt("15 kW: delay %.1f min, 10 kW: delay %.1f min (>0), max v2g %.1e kWh (<=1e-6)",
               regular.avg_delay_min.mean, congested.avg_delay_min.mean, v2g_worst));
  });

  // 6. Table-I wear pattern: arbitrage appears once wear drops to 0.03.
  guarded(6, "Table-I wear pattern", [&] {
    ExperimentConfig config;
    config.station.horizon = 12;
    config.station.interval_hours = 1.0;
    config.station.num_evs = 5;
    config.wear_grid = {0.03};
    config.bus_grid = {15.0};
    config.runs = 5;
    config.seed = 7;
    config.solver.kind = SolverKind::kAdmm;
    const ExperimentResult result = run_experiment(t12_bundle("soc_pairs.csv"), config);

    const GridPointResult& point = result.points[0];
    bool delays_zero = true;
    for (const RunMetrics& run : point.runs) delays_zero = delays_zero && run.avg_delay_min == 0.0;
    const bool pass = delays_zero && point.v2g_energy.mean > 0.01;
    report(6, pass, "Table-I wear pattern",
           fmt("15 kW, wear 0.03: mean v2g %.2f kWh (>0), delay %.1f min (=0)",
               point.v2g_energy.mean, point.avg_delay_min.mean));
  });

  // 7. Dominance chain on the seeded suite.
  guarded(7, "dominance chain", [&] {
    SolverChoice exact_solver;
    exact_solver.kind = SolverKind::kExact;
    double worst_excess = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 20; ++i) {
      const double flexible = exact_solutions[i].allocations.empty()
                                  ? solve_exact(gap_suite[i]).social_cost
                                  : exact_solutions[i].social_cost;
      for (BaselineKind kind : {BaselineKind::kInflexible, BaselineKind::kUnidirectional,
                                BaselineKind::kNaive}) {
        const double baseline =
            schedule_baseline(gap_suite[i], kind, exact_solver).social_cost;
        worst_excess = std::max(worst_excess, flexible - baseline);
      }
    }
    report(7, worst_excess <= 1e-6, "dominance chain",
           fmt("worst flexible-minus-baseline %.2e $ (<=1e-6), 20 instances x 3 baselines",
               worst_excess));
  });

  // 8. Value of heterogeneous preference knowledge.
  guarded(8, "heterogeneity value", [&] {
    const auto reduction_for = [&](const std::string& alpha_file) {
      DatasetBundle bundle;
      bundle.price_days = {{0.19, 0.15, 0.13, 0.22, 0.19, 0.165, 0.15, 0.145}};
      bundle.disconnect_samples = {4, 5, 4, 5, 5};
      bundle.soc_pairs = {{8, 20}, {9, 21}, {10, 22}, {11, 23}, {9.5, 21.5}};
      bundle.alpha_samples = io::load_column_csv(fixture("datasets/" + alpha_file),
                                                 "alpha_usd_per_h2");
      StationConfig station;
      station.horizon = 8;
      station.interval_hours = 1.0;
      station.bus_capacity = 6.0;
      station.num_evs = 3;

      SolverChoice exact_solver;
      exact_solver.kind = SolverKind::kExact;
      double total_reduction = 0.0;
      for (int run = 0; run < 20; ++run) {
        const StationScenario scenario = sample_scenario(bundle, station, 100 + run);
        const double individual = solve_schedule(scenario, exact_solver).social_cost;
        const double averaged =
            schedule_baseline(scenario, BaselineKind::kMeanAlpha, exact_solver).social_cost;
        total_reduction += (averaged - individual) / averaged;
      }
      return total_reduction / 20.0;
    };
    const double bimodal = reduction_for("alpha_bimodal.csv");
    const double homogeneous = reduction_for("alpha_default.csv");
    const bool pass = bimodal > 0.05 && homogeneous < 0.01;
    report(8, pass, "heterogeneity value",
           fmt("individual-vs-mean cost reduction: bimodal %.1f%% (>5%%), "
               "near-homogeneous %.2f%% (<1%%), 20 runs each",
               100.0 * bimodal, 100.0 * homogeneous));
  });

  // 9. Crafted full-battery donor earns a negative VCG payment.
  guarded(9, "negative VCG tax", [&] {
    const StationScenario donor = io::load_scenario(fixture("scenarios/donor.json"));
    const MechanismOutcome outcome = run_vcg(donor, truthful(donor));
    report(9, outcome.payments[0] < 0.0, "negative VCG tax",
           fmt("donor payment %.2f $ (<0), station budget %.2f $", outcome.payments[0],
               outcome.station_budget));
  });

  // 10. Numerical kernel checks: grid-search oracle, complementarity of the
  // returned profiles, SoC affinity.
  guarded(10, "numerical kernel checks", [&] {
    Ev toy;
    toy.params = {5.0, 0.9, 0.05, 2.0, 1.0, 1.0};
    toy.type = {1, 3.2, 1.0, 4.0};
    SubproblemContext ctx;
    ctx.other_load = {0.5, 0.0, 0.8};
    ctx.duals = {{0.2, 0.0, 0.4}, 1.3};
    ctx.prices = {0.3, 0.1, 0.2};
    ctx.interval_hours = 0.5;
    ctx.bus_capacity = 1.2;

    const FixedTauResult solved = solve_fixed_tau(toy, 3, ctx, 1e-8);
    double grid_best = std::numeric_limits<double>::infinity();
    std::vector<double> u(3);
    for (int i = -100; i <= 100; ++i) {
      for (int j = -100; j <= 100; ++j) {
        for (int k = -100; k <= 100; ++k) {
          u = {i * 0.01, j * 0.01, k * 0.01};
          double soc = toy.params.initial_soc;
          bool feasible = true;
          for (double x : u) {
            soc += toy.params.efficiency * x * ctx.interval_hours;
            if (soc < -1e-12 || soc > toy.params.battery_capacity + 1e-12) feasible = false;
          }
          if (!feasible) continue;
          grid_best = std::min(grid_best, augmented_objective(toy, 3, u, ctx));
        }
      }
    }
    const bool grid_ok =
        solved.objective <= grid_best + 1e-6 && grid_best <= solved.objective + 0.05;

    // Complementarity of returned profiles on wear-positive instances.
    double worst_complementarity = 0.0;
    for (int i = 0; i < 6; ++i) {
      const StationScenario& scenario = gap_suite[i];
      SubproblemContext c;
      c.other_load.assign(scenario.horizon, i % 2 == 0 ? 0.0 : 4.0);
      c.duals = {std::vector<double>(scenario.horizon, i % 3 == 0 ? 0.5 : 0.0), 1.0};
      c.prices = scenario.prices;
      c.interval_hours = scenario.interval_hours;
      c.bus_capacity = scenario.bus_capacity;
      const FixedTauResult res =
          solve_fixed_tau(scenario.fleet[0], scenario.horizon, c, 1e-6);
      for (double x : res.profile) {
        worst_complementarity =
            std::max(worst_complementarity, std::min(std::max(x, 0.0), std::max(-x, 0.0)));
      }
    }

    // SoC affinity on random profiles.
    std::mt19937_64 rng(55);
    double worst_affinity = 0.0;
    EvStaticParams params{50.0, 0.87, 0.0, 20.0, 10.0, 10.0};
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<double> u1(10), u2(10), mix(10);
      const double a = uniform(rng, -2.0, 2.0), b = uniform(rng, -2.0, 2.0);
      for (int t = 0; t < 10; ++t) {
        u1[t] = uniform(rng, -5.0, 5.0);
        u2[t] = uniform(rng, -5.0, 5.0);
        mix[t] = a * u1[t] + b * u2[t];
      }
      const auto s1 = soc_trajectory(params, u1, 0.25);
      const auto s2 = soc_trajectory(params, u2, 0.25);
      const auto sm = soc_trajectory(params, mix, 0.25);
      for (int t = 0; t <= 10; ++t) {
        worst_affinity = std::max(
            worst_affinity,
            std::abs((sm[t] - 20.0) - a * (s1[t] - 20.0) - b * (s2[t] - 20.0)));
      }
    }

    const bool pass = grid_ok && worst_complementarity <= 1e-6 && worst_affinity <= 1e-10;
    report(10, pass, "numerical kernel checks",
           fmt("grid gap %+.1e $ (in [-1e-6, 0.05]), complementarity %.1e (<=1e-6), "
               "affinity %.1e (<=1e-10)",
               grid_best - solved.objective, worst_complementarity, worst_affinity));
  });

  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures;
}
