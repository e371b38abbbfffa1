#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "v2g/errors.hpp"
#include "v2g/io.hpp"
#include "v2g/sim.hpp"

namespace {

namespace fs = std::filesystem;
using v2g::io::json;

std::string default_out_dir() {
  const char* env = std::getenv("V2G_OUT_DIR");
  return env != nullptr && *env != '\0' ? std::string(env) : std::string(".");
}

std::string sibling_path(const std::string& out_path, const std::string& suffix) {
  fs::path p(out_path);
  const std::string stem = p.stem().string();
  return (p.parent_path() / (stem + suffix)).string();
}

struct SolverFlags {
  std::string solver = "admm";
  double nu = 1.0;
  int max_sweeps = 200;
  double tol = 1e-6;
  int tau_window = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--solver", solver, "Solver: admm or exact")
        ->check(CLI::IsMember({"admm", "exact"}));
    cmd->add_option("--nu", nu, "ADMM penalty parameter");
    cmd->add_option("--max-sweeps", max_sweeps, "ADMM sweep limit");
    cmd->add_option("--tol", tol, "Subproblem duality-gap tolerance");
    cmd->add_option("--tau-window", tau_window,
                    "Restrict candidate taus to +/- this window around the desired time");
  }

  v2g::SolverChoice choice() const {
    v2g::SolverChoice out;
    out.kind = solver == "exact" ? v2g::SolverKind::kExact : v2g::SolverKind::kAdmm;
    out.admm.penalty = nu;
    out.admm.max_sweeps = max_sweeps;
    out.admm.subproblem_tolerance = tol;
    out.admm.tau_window = tau_window;
    out.exact.qp_tolerance = std::min(tol, 1e-8);
    return out;
  }
};

int cmd_schedule(const std::string& scenario_path, const SolverFlags& flags,
                 const std::string& out_opt) {
  const v2g::StationScenario scenario = v2g::io::load_scenario(scenario_path);
  const v2g::ScheduleSolution solution = v2g::solve_schedule(scenario, flags.choice());

  const std::string out =
      out_opt.empty() ? (fs::path(default_out_dir()) / "schedule.json").string() : out_opt;
  v2g::io::atomic_write(out, v2g::io::to_json(solution).dump(2) + "\n");
  const std::string soc_out = sibling_path(out, "_soc.csv");
  v2g::io::atomic_write(soc_out, v2g::io::soc_trajectory_csv(scenario, solution.allocations));

  std::cout << "social_cost=" << solution.social_cost << " converged=" << solution.converged
            << " sweeps=" << solution.sweeps_used << '\n'
            << "wrote " << out << " and " << soc_out << '\n';
  if (!v2g::check_feasible(scenario, solution.allocations).ok()) {
    std::cerr << "error: solver returned an infeasible schedule\n";
    return 2;
  }
  return 0;
}

int cmd_vcg(const std::string& scenario_path, const std::string& reports_path,
            const SolverFlags& flags, const std::string& out_opt) {
  const v2g::StationScenario scenario = v2g::io::load_scenario(scenario_path);
  const std::vector<v2g::EvType> reports = v2g::io::load_reports(reports_path);
  if (reports.size() != scenario.fleet.size()) {
    throw v2g::InputError("reports file has " + std::to_string(reports.size()) +
                          " entries for a fleet of " + std::to_string(scenario.fleet.size()));
  }

  v2g::MechanismConfig config;
  const v2g::SolverChoice choice = flags.choice();
  config.solver = choice.kind;
  config.admm = choice.admm;
  config.exact = choice.exact;
  const v2g::MechanismOutcome outcome = v2g::run_vcg(scenario, reports, config);

  const std::string out =
      out_opt.empty() ? (fs::path(default_out_dir()) / "vcg.json").string() : out_opt;
  v2g::io::atomic_write(out, v2g::io::to_json(outcome).dump(2) + "\n");
  std::cout << "station_budget=" << outcome.station_budget << '\n' << "wrote " << out << '\n';
  return 0;
}

int cmd_experiment(const std::string& config_path, std::uint64_t seed, bool seed_set, int runs,
                   bool runs_set, const std::string& out_dir_opt) {
  const json j = v2g::io::load_json(config_path);
  const std::string base_dir = fs::path(config_path).parent_path().string();
  v2g::ExperimentConfig config = v2g::experiment_config_from_json(j, base_dir);
  if (seed_set) config.seed = seed;
  if (runs_set) config.runs = runs;
  if (config.runs < 1) throw v2g::InputError("runs must be >= 1");

  const v2g::DatasetBundle bundle =
      v2g::load_datasets(config.datasets, config.station.horizon);
  const v2g::ExperimentResult result = v2g::run_experiment(bundle, config);

  const std::string out_dir = out_dir_opt.empty() ? default_out_dir() : out_dir_opt;
  const std::string json_path = (fs::path(out_dir) / (config.name + ".json")).string();
  const std::string csv_path = (fs::path(out_dir) / (config.name + ".csv")).string();
  v2g::io::atomic_write(json_path, v2g::experiment_result_to_json(result).dump(2) + "\n");
  v2g::io::atomic_write(csv_path, v2g::experiment_result_csv(result));
  std::cout << "wrote " << json_path << " and " << csv_path << '\n';
  return 0;
}

int cmd_validate(const std::string& scenario_path) {
  const json j = v2g::io::load_json(scenario_path);
  const v2g::StationScenario scenario = v2g::io::scenario_from_json(j);
  std::cout << "scenario ok: " << scenario.num_evs() << " EVs, T=" << scenario.horizon << '\n';
  if (!v2g::io::has_allocations(j)) return 0;

  const std::vector<v2g::Allocation> allocations =
      v2g::io::allocations_from_json(j, scenario.horizon);
  if (allocations.size() != scenario.fleet.size()) {
    throw v2g::InputError("embedded allocations do not match the fleet size");
  }
  const v2g::FeasibilityReport report = v2g::check_feasible(scenario, allocations);
  if (report.ok()) {
    std::cout << "allocations feasible\n";
    return 0;
  }
  for (const v2g::Violation& v : report.violations) {
    std::cout << "violation: " << v2g::to_string(v.constraint) << " ev=" << v.ev
              << " t=" << v.time << " magnitude=" << v.magnitude << '\n';
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bidirectional EV charge scheduling, VCG payments and experiments"};
  app.require_subcommand(1);

  std::string scenario_path, reports_path, config_path, out_path, out_dir;
  SolverFlags schedule_flags, vcg_flags;
  std::uint64_t seed = 0;
  int runs = 1;

  CLI::App* schedule = app.add_subcommand("schedule", "Compute a charge schedule");
  schedule->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  schedule_flags.attach(schedule);
  schedule->add_option("--out", out_path, "Output JSON path");

  CLI::App* vcg = app.add_subcommand("vcg", "Run the truth-eliciting mechanism");
  vcg->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  vcg->add_option("reports", reports_path, "Reported types JSON file")->required();
  vcg_flags.solver = "exact";
  vcg_flags.attach(vcg);
  vcg->add_option("--out", out_path, "Output JSON path");

  CLI::App* experiment = app.add_subcommand("experiment", "Run a seeded experiment grid");
  experiment->add_option("config", config_path, "Experiment config JSON file")->required();
  CLI::Option* seed_opt = experiment->add_option("--seed", seed, "Override the config seed");
  CLI::Option* runs_opt = experiment->add_option("--runs", runs, "Override the config run count");
  experiment->add_option("--out-dir", out_dir, "Output directory");

  CLI::App* validate = app.add_subcommand("validate", "Validate a scenario file");
  validate->add_option("scenario", scenario_path, "Scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (schedule->parsed()) return cmd_schedule(scenario_path, schedule_flags, out_path);
    if (vcg->parsed()) return cmd_vcg(scenario_path, reports_path, vcg_flags, out_path);
    if (experiment->parsed()) {
      return cmd_experiment(config_path, seed, seed_opt->count() > 0, runs,
                            runs_opt->count() > 0, out_dir);
    }
    if (validate->parsed()) return cmd_validate(scenario_path);
  } catch (const v2g::SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return 2;
  } catch (const v2g::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
