#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "v2g/mechanism.hpp"
#include "v2g/model.hpp"

namespace v2g::io {

using json = nlohmann::ordered_json;

json to_json(const Allocation& alloc);
Allocation allocation_from_json(const json& j);

json to_json(const StationScenario& scenario);
StationScenario scenario_from_json(const json& j);

json to_json(const ScheduleSolution& solution);
ScheduleSolution schedule_solution_from_json(const json& j);

json to_json(const MechanismOutcome& outcome);
MechanismOutcome mechanism_outcome_from_json(const json& j);

// File helpers. All parse failures surface as InputError with the path
// (and line, for CSV) in the message.
json load_json(const std::string& path);
StationScenario load_scenario(const std::string& path);

// Optional "allocations" array embedded in a scenario file.
bool has_allocations(const json& j);
std::vector<Allocation> allocations_from_json(const json& j, int horizon);

// Reports file: either a bare array of type records or {"reports": [...]}.
std::vector<EvType> load_reports(const std::string& path);

// One price day: header `interval_index,price_usd_per_kwh`, exactly
// `expected_rows` data rows.
std::vector<double> load_price_csv(const std::string& path, int expected_rows);

// Single-column and two-column numeric CSVs with a fixed expected header.
std::vector<double> load_column_csv(const std::string& path, const std::string& header);
std::vector<std::pair<double, double>> load_pair_csv(const std::string& path,
                                                     const std::string& header);

// Per-EV SoC trajectories behind the schedule plots.
std::string soc_trajectory_csv(const StationScenario& scenario,
                               const std::vector<Allocation>& allocations);

// Write via a temp file and rename, so readers never see partial output.
void atomic_write(const std::string& path, const std::string& contents);

}  // namespace v2g::io
