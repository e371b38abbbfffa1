#include "v2g/sim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

#include "v2g/errors.hpp"

namespace v2g {

namespace {

// Deterministic uniform index draw; avoids the implementation-defined
// behavior of std::uniform_int_distribution so seeded outputs are portable.
std::size_t draw_index(std::mt19937_64& rng, std::size_t size) {
  return static_cast<std::size_t>(rng() % size);
}

Aggregate aggregate_of(const std::vector<RunMetrics>& runs, double RunMetrics::*field) {
  Aggregate agg;
  if (runs.empty()) return agg;
  for (const RunMetrics& r : runs) agg.mean += r.*field;
  agg.mean /= static_cast<double>(runs.size());
  if (runs.size() > 1) {
    double ss = 0.0;
    for (const RunMetrics& r : runs) ss += (r.*field - agg.mean) * (r.*field - agg.mean);
    agg.stddev = std::sqrt(ss / static_cast<double>(runs.size() - 1));
  }
  return agg;
}

}  // namespace

DatasetBundle load_datasets(const DatasetPaths& paths, int horizon) {
  if (paths.price_files.empty()) throw InputError("datasets: no price files given");
  DatasetBundle bundle;
  for (const std::string& file : paths.price_files) {
    bundle.price_days.push_back(io::load_price_csv(file, horizon));
  }

  const std::vector<double> raw_disconnects =
      io::load_column_csv(paths.disconnect_file, "disconnect_interval");
  for (std::size_t i = 0; i < raw_disconnects.size(); ++i) {
    const double v = raw_disconnects[i];
    if (v != std::floor(v) || v < 0 || v > horizon) {
      throw InputError(paths.disconnect_file + ":" + std::to_string(i + 2) +
                       ": disconnect_interval must be an integer in [0, " +
                       std::to_string(horizon) + "]");
    }
    bundle.disconnect_samples.push_back(static_cast<int>(v));
  }

  bundle.soc_pairs = io::load_pair_csv(paths.soc_file, "initial_soc_kwh,desired_soc_kwh");
  for (std::size_t i = 0; i < bundle.soc_pairs.size(); ++i) {
    const auto& [initial, desired] = bundle.soc_pairs[i];
    if (initial < 0.0 || desired < initial) {
      throw InputError(paths.soc_file + ":" + std::to_string(i + 2) +
                       ": need 0 <= initial_soc_kwh <= desired_soc_kwh");
    }
  }

  bundle.alpha_samples = io::load_column_csv(paths.alpha_file, "alpha_usd_per_h2");
  for (std::size_t i = 0; i < bundle.alpha_samples.size(); ++i) {
    if (bundle.alpha_samples[i] < 0.0) {
      throw InputError(paths.alpha_file + ":" + std::to_string(i + 2) +
                       ": alpha_usd_per_h2 must be >= 0");
    }
  }
  return bundle;
}

StationScenario sample_scenario(const DatasetBundle& bundle, const StationConfig& config,
                                std::uint64_t seed) {
  if (bundle.price_days.empty() || bundle.disconnect_samples.empty() ||
      bundle.soc_pairs.empty() || bundle.alpha_samples.empty()) {
    throw InputError("sample_scenario: dataset bundle has an empty pool");
  }
  std::mt19937_64 rng(seed);

  StationScenario scenario;
  scenario.horizon = config.horizon;
  scenario.interval_hours = config.interval_hours;
  scenario.bus_capacity = config.bus_capacity;
  scenario.prices = bundle.price_days[draw_index(rng, bundle.price_days.size())];
  if (static_cast<int>(scenario.prices.size()) != config.horizon)
    throw InputError("sample_scenario: price day length does not match the horizon");

  const double capacity = config.ev_defaults.battery_capacity;
  for (int n = 0; n < config.num_evs; ++n) {
    Ev ev;
    ev.params = config.ev_defaults;
    const auto [initial, desired] = bundle.soc_pairs[draw_index(rng, bundle.soc_pairs.size())];
    ev.params.initial_soc = std::clamp(initial, 0.0, capacity);
    ev.type.desired_soc = std::clamp(desired, 0.0, capacity);
    ev.type.desired_disconnect = std::min(
        bundle.disconnect_samples[draw_index(rng, bundle.disconnect_samples.size())],
        config.horizon);
    ev.type.temporal_inflexibility =
        bundle.alpha_samples[draw_index(rng, bundle.alpha_samples.size())];
    ev.type.soc_inflexibility = config.soc_inflexibility;
    scenario.fleet.push_back(std::move(ev));
  }
  scenario.validate();
  return scenario;
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kUnidirectional: return "unidirectional";
    case BaselineKind::kInflexible: return "inflexible";
    case BaselineKind::kNaive: return "naive";
    case BaselineKind::kMeanAlpha: return "mean_alpha";
  }
  return "unknown";
}

BaselineKind baseline_from_string(const std::string& name) {
  if (name == "unidirectional") return BaselineKind::kUnidirectional;
  if (name == "inflexible") return BaselineKind::kInflexible;
  if (name == "naive") return BaselineKind::kNaive;
  if (name == "mean_alpha") return BaselineKind::kMeanAlpha;
  throw InputError("unknown baseline kind: " + name);
}

ScheduleSolution solve_schedule(const StationScenario& scenario, const SolverChoice& solver) {
  if (solver.kind == SolverKind::kExact) return solve_exact(scenario, solver.exact);
  return run_admm(scenario, solver.admm);
}

ScheduleSolution schedule_baseline(const StationScenario& scenario, BaselineKind kind,
                                   const SolverChoice& solver) {
  switch (kind) {
    case BaselineKind::kUnidirectional: {
      StationScenario restricted = scenario;
      for (Ev& ev : restricted.fleet) ev.params.max_discharge_rate = 0.0;
      ScheduleSolution solution = solve_schedule(restricted, solver);
      solution.social_cost = social_cost(scenario, solution.allocations);
      return solution;
    }
    case BaselineKind::kInflexible: {
      if (solver.kind == SolverKind::kExact) {
        std::vector<std::vector<int>> pinned;
        for (const Ev& ev : scenario.fleet) pinned.push_back({ev.type.desired_disconnect});
        return solve_exact(scenario, pinned, solver.exact);
      }
      SolverChoice pinned = solver;
      pinned.admm.tau_window = 0;
      return solve_schedule(scenario, pinned);
    }
    case BaselineKind::kNaive: {
      ScheduleSolution solution;
      solution.allocations = naive_parallel_schedule(scenario);
      solution.social_cost = social_cost(scenario, solution.allocations);
      solution.converged = true;
      return solution;
    }
    case BaselineKind::kMeanAlpha: {
      double mean_alpha = 0.0;
      for (const Ev& ev : scenario.fleet) mean_alpha += ev.type.temporal_inflexibility;
      mean_alpha /= static_cast<double>(scenario.fleet.size());
      StationScenario averaged = scenario;
      for (Ev& ev : averaged.fleet) ev.type.temporal_inflexibility = mean_alpha;
      ScheduleSolution solution = solve_schedule(averaged, solver);
      solution.social_cost = social_cost(scenario, solution.allocations);  // true types
      return solution;
    }
  }
  throw InputError("unknown baseline kind");
}

bool arbitrage_threshold_check(std::span<const double> prices, double wear_cost) {
  if (prices.empty()) throw InputError("arbitrage check: empty price vector");
  const auto [lo, hi] = std::minmax_element(prices.begin(), prices.end());
  return *hi - *lo > 2.0 * wear_cost;
}

double average_delay_minutes(const StationScenario& scenario,
                             const std::vector<Allocation>& allocations) {
  double total = 0.0;
  for (std::size_t n = 0; n < allocations.size(); ++n) {
    const int delay =
        allocations[n].disconnect_time - scenario.fleet[n].type.desired_disconnect;
    total += std::max(0, delay) * scenario.interval_hours * 60.0;
  }
  return total / static_cast<double>(allocations.size());
}

double v2g_energy_kwh(const StationScenario& scenario,
                      const std::vector<Allocation>& allocations) {
  double total = 0.0;
  for (const Allocation& a : allocations) {
    for (double u : a.power_profile) total += std::max(0.0, -u) * scenario.interval_hours;
  }
  return total;
}

ExperimentResult run_experiment(const DatasetBundle& bundle, const ExperimentConfig& config) {
  if (config.runs < 1) throw InputError("experiment: runs must be >= 1");
  ExperimentResult result;
  result.config = config;

  std::vector<double> wear_grid = config.wear_grid;
  if (wear_grid.empty()) wear_grid.push_back(config.station.ev_defaults.wear_cost);
  std::vector<double> bus_grid = config.bus_grid;
  if (bus_grid.empty()) bus_grid.push_back(config.station.bus_capacity);

  for (double wear : wear_grid) {
    for (double bus : bus_grid) {
      GridPointResult point;
      point.wear_cost = wear;
      point.bus_capacity = bus;

      for (int run = 0; run < config.runs; ++run) {
        const std::uint64_t run_seed = config.seed + static_cast<std::uint64_t>(run);
        StationScenario scenario = sample_scenario(bundle, config.station, run_seed);
        for (Ev& ev : scenario.fleet) ev.params.wear_cost = wear;
        scenario.bus_capacity = bus;

        RunMetrics metrics;
        metrics.run = run;
        metrics.seed = run_seed;
        try {
          const ScheduleSolution solution = solve_schedule(scenario, config.solver);
          metrics.social_cost = solution.social_cost;
          metrics.avg_delay_min = average_delay_minutes(scenario, solution.allocations);
          metrics.v2g_energy_kwh = v2g_energy_kwh(scenario, solution.allocations);
          for (BaselineKind kind : config.baselines) {
            metrics.baseline_costs.push_back(
                schedule_baseline(scenario, kind, config.solver).social_cost);
          }
          if (config.compute_payments) {
            std::vector<EvType> reports;
            for (const Ev& ev : scenario.fleet) reports.push_back(ev.type);
            MechanismConfig mech;
            mech.solver = config.solver.kind;
            mech.exact = config.solver.exact;
            mech.admm = config.solver.admm;
            const MechanismOutcome outcome = run_vcg(scenario, reports, mech);
            metrics.utilities = outcome.utilities;
            metrics.payments = outcome.payments;
          }
        } catch (const SolverError& err) {
          throw SolverError("experiment run " + std::to_string(run) + " (seed " +
                                std::to_string(run_seed) + "): " + err.what(),
                            err.primal_residual, err.dual_residual, err.gap, err.iterations);
        }
        point.runs.push_back(std::move(metrics));
      }

      point.social_cost = aggregate_of(point.runs, &RunMetrics::social_cost);
      point.avg_delay_min = aggregate_of(point.runs, &RunMetrics::avg_delay_min);
      point.v2g_energy = aggregate_of(point.runs, &RunMetrics::v2g_energy_kwh);
      result.points.push_back(std::move(point));
    }
  }
  return result;
}

ExperimentConfig experiment_config_from_json(const io::json& j, const std::string& base_dir) {
  namespace fs = std::filesystem;
  const auto resolve = [&](const std::string& path) {
    const fs::path p(path);
    return p.is_absolute() ? path : (fs::path(base_dir) / p).string();
  };

  ExperimentConfig config;
  try {
    config.name = j.value("name", config.name);
    if (j.contains("station")) {
      const io::json& s = j.at("station");
      config.station.horizon = s.value("horizon", config.station.horizon);
      config.station.interval_hours = s.value("interval_hours", config.station.interval_hours);
      config.station.bus_capacity = s.value("bus_capacity", config.station.bus_capacity);
      config.station.num_evs = s.value("num_evs", config.station.num_evs);
      config.station.soc_inflexibility =
          s.value("soc_inflexibility", config.station.soc_inflexibility);
      if (s.contains("ev_defaults")) {
        const io::json& d = s.at("ev_defaults");
        EvStaticParams& ev = config.station.ev_defaults;
        ev.battery_capacity = d.value("battery_capacity", ev.battery_capacity);
        ev.efficiency = d.value("efficiency", ev.efficiency);
        ev.wear_cost = d.value("wear_cost", ev.wear_cost);
        ev.max_charge_rate = d.value("max_charge_rate", ev.max_charge_rate);
        ev.max_discharge_rate = d.value("max_discharge_rate", ev.max_discharge_rate);
      }
    }
    const io::json& data = j.at("datasets");
    for (const io::json& p : data.at("prices")) {
      config.datasets.price_files.push_back(resolve(p.get<std::string>()));
    }
    config.datasets.disconnect_file = resolve(data.at("disconnects").get<std::string>());
    config.datasets.soc_file = resolve(data.at("soc_pairs").get<std::string>());
    config.datasets.alpha_file = resolve(data.at("alphas").get<std::string>());

    if (j.contains("grid")) {
      const io::json& g = j.at("grid");
      if (g.contains("wear_cost")) config.wear_grid = g.at("wear_cost").get<std::vector<double>>();
      if (g.contains("bus_capacity"))
        config.bus_grid = g.at("bus_capacity").get<std::vector<double>>();
    }
    config.runs = j.value("runs", config.runs);
    config.seed = j.value("seed", config.seed);
    const std::string solver = j.value("solver", std::string("admm"));
    if (solver == "admm") {
      config.solver.kind = SolverKind::kAdmm;
    } else if (solver == "exact") {
      config.solver.kind = SolverKind::kExact;
    } else {
      throw InputError("unknown solver: " + solver);
    }
    if (j.contains("admm")) {
      const io::json& a = j.at("admm");
      AdmmConfig& admm = config.solver.admm;
      admm.penalty = a.value("penalty", admm.penalty);
      admm.max_sweeps = a.value("max_sweeps", admm.max_sweeps);
      admm.primal_tolerance = a.value("primal_tolerance", admm.primal_tolerance);
      admm.stall_window = a.value("stall_window", admm.stall_window);
      admm.tau_window = a.value("tau_window", admm.tau_window);
      admm.subproblem_tolerance = a.value("subproblem_tolerance", admm.subproblem_tolerance);
    }
    if (j.contains("baselines")) {
      for (const io::json& b : j.at("baselines")) {
        config.baselines.push_back(baseline_from_string(b.get<std::string>()));
      }
    }
    config.compute_payments = j.value("compute_payments", config.compute_payments);
  } catch (const io::json::exception& e) {
    throw InputError(std::string("bad experiment config: ") + e.what());
  }
  return config;
}

io::json experiment_result_to_json(const ExperimentResult& result) {
  const ExperimentConfig& config = result.config;
  io::json grid{{"wear_cost", io::json::array()}, {"bus_capacity", io::json::array()}};
  io::json baselines = io::json::array();
  for (BaselineKind kind : config.baselines) baselines.push_back(to_string(kind));

  io::json points = io::json::array();
  for (const GridPointResult& point : result.points) {
    io::json runs = io::json::array();
    for (const RunMetrics& r : point.runs) {
      io::json run{{"run", r.run},
                   {"seed", r.seed},
                   {"social_cost", r.social_cost},
                   {"avg_delay_min", r.avg_delay_min},
                   {"v2g_energy_kwh", r.v2g_energy_kwh}};
      if (!r.baseline_costs.empty()) {
        io::json bc;
        for (std::size_t i = 0; i < r.baseline_costs.size(); ++i) {
          bc[to_string(config.baselines[i])] = r.baseline_costs[i];
        }
        run["baseline_costs"] = std::move(bc);
      }
      if (!r.payments.empty()) {
        run["payments"] = r.payments;
        run["utilities"] = r.utilities;
      }
      runs.push_back(std::move(run));
    }
    points.push_back(io::json{
        {"wear_cost", point.wear_cost},
        {"bus_capacity", point.bus_capacity},
        {"runs", std::move(runs)},
        {"aggregates",
         io::json{{"social_cost",
                   io::json{{"mean", point.social_cost.mean}, {"stddev", point.social_cost.stddev}}},
                  {"avg_delay_min",
                   io::json{{"mean", point.avg_delay_min.mean},
                            {"stddev", point.avg_delay_min.stddev}}},
                  {"v2g_energy_kwh",
                   io::json{{"mean", point.v2g_energy.mean},
                            {"stddev", point.v2g_energy.stddev}}}}}});
  }

  return io::json{{"name", config.name},
                  {"seed", config.seed},
                  {"runs", config.runs},
                  {"solver", config.solver.kind == SolverKind::kExact ? "exact" : "admm"},
                  {"station",
                   io::json{{"horizon", config.station.horizon},
                            {"interval_hours", config.station.interval_hours},
                            {"bus_capacity", config.station.bus_capacity},
                            {"num_evs", config.station.num_evs},
                            {"soc_inflexibility", config.station.soc_inflexibility}}},
                  {"baselines", std::move(baselines)},
                  {"points", std::move(points)}};
}

std::string experiment_result_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out.precision(12);
  out << "wear_cost,bus_capacity,run,seed,social_cost,avg_delay_min,v2g_energy_kwh";
  for (BaselineKind kind : result.config.baselines) {
    out << ",baseline_" << to_string(kind) << "_cost";
  }
  out << '\n';
  for (const GridPointResult& point : result.points) {
    for (const RunMetrics& r : point.runs) {
      out << point.wear_cost << ',' << point.bus_capacity << ',' << r.run << ',' << r.seed << ','
          << r.social_cost << ',' << r.avg_delay_min << ',' << r.v2g_energy_kwh;
      for (double cost : r.baseline_costs) out << ',' << cost;
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace v2g
