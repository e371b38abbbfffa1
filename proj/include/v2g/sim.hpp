#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "v2g/admm.hpp"
#include "v2g/exact.hpp"
#include "v2g/io.hpp"
#include "v2g/mechanism.hpp"
#include "v2g/model.hpp"

namespace v2g {

// Sampling pools for scenario generation. The repo ships synthetic fixtures
// whose summary statistics follow the case-study datasets (volatile price
// days with a ~0.09 $/kWh spread, late-afternoon disconnections, one-hour
// delay compensations mostly in the 30-34 $ range); real data in the same
// schema can be dropped in.
struct DatasetBundle {
  std::vector<std::vector<double>> price_days;          // $/kWh, each of length T
  std::vector<int> disconnect_samples;                  // interval indices
  std::vector<std::pair<double, double>> soc_pairs;     // (initial, desired) kWh
  std::vector<double> alpha_samples;                    // $/h^2
};

struct DatasetPaths {
  std::vector<std::string> price_files;
  std::string disconnect_file;
  std::string soc_file;
  std::string alpha_file;
};

// Loads and validates the four pools; any malformed or invariant-violating
// row aborts with its file and line number.
DatasetBundle load_datasets(const DatasetPaths& paths, int horizon);

struct StationConfig {
  int horizon = 48;             // 10 a.m. to 10 p.m. at 15 minutes
  double interval_hours = 0.25;
  double bus_capacity = 15.0;   // kW, regularly congested for five 6.6 kW EVs
  int num_evs = 5;
  EvStaticParams ev_defaults{40.0, 0.87, 0.13, 0.0, 6.6, 6.6};  // initial_soc is sampled
  double soc_inflexibility = 10.0;  // beta, $/kWh^2
};

// Deterministic for a given seed: one price day plus per-EV draws of
// disconnection time, SoC pair and inflexibility.
StationScenario sample_scenario(const DatasetBundle& bundle, const StationConfig& config,
                                std::uint64_t seed);

enum class BaselineKind { kUnidirectional, kInflexible, kNaive, kMeanAlpha };

std::string to_string(BaselineKind kind);
BaselineKind baseline_from_string(const std::string& name);

struct SolverChoice {
  SolverKind kind = SolverKind::kAdmm;
  AdmmConfig admm;
  ExactConfig exact;
};

ScheduleSolution solve_schedule(const StationScenario& scenario, const SolverChoice& solver);

// Reference schedules: charging only (no discharge), disconnection pinned to
// the desired time, the naive parallel schedule, or planning with every
// inflexibility replaced by the fleet mean (cost still evaluated at the true
// types).
ScheduleSolution schedule_baseline(const StationScenario& scenario, BaselineKind kind,
                                   const SolverChoice& solver);

// Round-trip profitability under the linear wear model: selling and buying
// back each incur the wear cost, so the price spread must beat twice it.
bool arbitrage_threshold_check(std::span<const double> prices, double wear_cost);

double average_delay_minutes(const StationScenario& scenario,
                             const std::vector<Allocation>& allocations);
double v2g_energy_kwh(const StationScenario& scenario,
                      const std::vector<Allocation>& allocations);

struct RunMetrics {
  int run = 0;
  std::uint64_t seed = 0;
  double social_cost = 0.0;
  double avg_delay_min = 0.0;
  double v2g_energy_kwh = 0.0;
  std::vector<double> baseline_costs;  // aligned with ExperimentConfig::baselines
  std::vector<double> utilities;       // filled when payments are computed
  std::vector<double> payments;
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
};

struct GridPointResult {
  double wear_cost = 0.0;
  double bus_capacity = 0.0;
  std::vector<RunMetrics> runs;
  Aggregate social_cost;
  Aggregate avg_delay_min;
  Aggregate v2g_energy;
};

struct ExperimentConfig {
  std::string name = "experiment";
  StationConfig station;
  DatasetPaths datasets;
  std::vector<double> wear_grid;  // empty = station default
  std::vector<double> bus_grid;   // empty = station default
  int runs = 1;
  std::uint64_t seed = 0;
  SolverChoice solver;
  std::vector<BaselineKind> baselines;
  bool compute_payments = false;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<GridPointResult> points;
};

// Runs the grid: the same per-run scenario is reused across grid points
// (only wear and bus capacity are overridden) so sweeps compare like with
// like.
ExperimentResult run_experiment(const DatasetBundle& bundle, const ExperimentConfig& config);

// Experiment config file (JSON); dataset paths resolve relative to the
// config file's directory.
ExperimentConfig experiment_config_from_json(const io::json& j, const std::string& base_dir);

io::json experiment_result_to_json(const ExperimentResult& result);
std::string experiment_result_csv(const ExperimentResult& result);

}  // namespace v2g
