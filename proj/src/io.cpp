#include "v2g/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "v2g/errors.hpp"

namespace v2g::io {

namespace {

json params_to_json(const EvStaticParams& p) {
  return json{{"battery_capacity", p.battery_capacity},
              {"efficiency", p.efficiency},
              {"wear_cost", p.wear_cost},
              {"initial_soc", p.initial_soc},
              {"max_charge_rate", p.max_charge_rate},
              {"max_discharge_rate", p.max_discharge_rate}};
}

json type_to_json(const EvType& t) {
  return json{{"desired_disconnect", t.desired_disconnect},
              {"desired_soc", t.desired_soc},
              {"temporal_inflexibility", t.temporal_inflexibility},
              {"soc_inflexibility", t.soc_inflexibility}};
}

EvType type_from_json(const json& j) {
  try {
    EvType t;
    t.desired_disconnect = j.at("desired_disconnect").get<int>();
    t.desired_soc = j.at("desired_soc").get<double>();
    t.temporal_inflexibility = j.at("temporal_inflexibility").get<double>();
    t.soc_inflexibility = j.at("soc_inflexibility").get<double>();
    return t;
  } catch (const json::exception& e) {
    throw InputError(std::string("bad EV type record: ") + e.what());
  }
}

EvStaticParams params_from_json(const json& j) {
  try {
    EvStaticParams p;
    p.battery_capacity = j.at("battery_capacity").get<double>();
    p.efficiency = j.at("efficiency").get<double>();
    p.wear_cost = j.at("wear_cost").get<double>();
    p.initial_soc = j.at("initial_soc").get<double>();
    p.max_charge_rate = j.at("max_charge_rate").get<double>();
    p.max_discharge_rate = j.at("max_discharge_rate").get<double>();
    return p;
  } catch (const json::exception& e) {
    throw InputError(std::string("bad EV params record: ") + e.what());
  }
}

double parse_number(const std::string& text, const std::string& path, int line) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw InputError(path + ":" + std::to_string(line) + ": not a number: '" + text + "'");
  }
}

std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               const std::string& expected_header) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header) {
    throw InputError(path + ":1: expected header '" + expected_header + "', got '" + line + "'");
  }
  std::vector<std::vector<std::string>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.push_back("");
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw InputError(path + " contains a header but no data rows");
  return rows;
}

}  // namespace

json to_json(const Allocation& alloc) {
  return json{{"disconnect_time", alloc.disconnect_time},
              {"power_profile", alloc.power_profile}};
}

Allocation allocation_from_json(const json& j) {
  try {
    Allocation a;
    a.disconnect_time = j.at("disconnect_time").get<int>();
    a.power_profile = j.at("power_profile").get<std::vector<double>>();
    return a;
  } catch (const json::exception& e) {
    throw InputError(std::string("bad allocation record: ") + e.what());
  }
}

json to_json(const StationScenario& scenario) {
  json fleet = json::array();
  for (const Ev& ev : scenario.fleet) {
    json record = params_to_json(ev.params);
    record.update(type_to_json(ev.type));
    fleet.push_back(std::move(record));
  }
  return json{{"horizon", scenario.horizon},
              {"interval_hours", scenario.interval_hours},
              {"bus_capacity", scenario.bus_capacity},
              {"prices", scenario.prices},
              {"fleet", std::move(fleet)}};
}

StationScenario scenario_from_json(const json& j) {
  StationScenario scenario;
  try {
    scenario.horizon = j.at("horizon").get<int>();
    scenario.interval_hours = j.at("interval_hours").get<double>();
    scenario.bus_capacity = j.at("bus_capacity").get<double>();
    scenario.prices = j.at("prices").get<std::vector<double>>();
    for (const json& record : j.at("fleet")) {
      scenario.fleet.push_back({params_from_json(record), type_from_json(record)});
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("bad scenario: ") + e.what());
  }
  scenario.validate();
  return scenario;
}

json to_json(const ScheduleSolution& solution) {
  json allocations = json::array();
  for (const Allocation& a : solution.allocations) allocations.push_back(to_json(a));
  json trace = json::array();
  for (const SweepTrace& s : solution.per_sweep_trace) {
    trace.push_back(json{{"sweep", s.sweep},
                         {"cost", s.cost},
                         {"residual", s.residual},
                         {"best_cost", s.best_cost},
                         {"best_residual", s.best_residual}});
  }
  return json{{"allocations", std::move(allocations)},
              {"social_cost", solution.social_cost},
              {"primal_residual", solution.primal_residual},
              {"sweeps_used", solution.sweeps_used},
              {"converged", solution.converged},
              {"per_sweep_trace", std::move(trace)}};
}

ScheduleSolution schedule_solution_from_json(const json& j) {
  try {
    ScheduleSolution s;
    for (const json& record : j.at("allocations")) s.allocations.push_back(allocation_from_json(record));
    s.social_cost = j.at("social_cost").get<double>();
    s.primal_residual = j.at("primal_residual").get<double>();
    s.sweeps_used = j.at("sweeps_used").get<int>();
    s.converged = j.at("converged").get<bool>();
    for (const json& record : j.at("per_sweep_trace")) {
      s.per_sweep_trace.push_back({record.at("sweep").get<int>(), record.at("cost").get<double>(),
                                   record.at("residual").get<double>(),
                                   record.at("best_cost").get<double>(),
                                   record.at("best_residual").get<double>()});
    }
    return s;
  } catch (const json::exception& e) {
    throw InputError(std::string("bad schedule solution: ") + e.what());
  }
}

json to_json(const MechanismOutcome& outcome) {
  json allocations = json::array();
  for (const Allocation& a : outcome.allocations) allocations.push_back(to_json(a));
  return json{{"allocations", std::move(allocations)},
              {"payments", outcome.payments},
              {"utilities", outcome.utilities},
              {"outside_options", outcome.outside_options},
              {"ir_satisfied", outcome.ir_satisfied},
              {"station_budget", outcome.station_budget}};
}

MechanismOutcome mechanism_outcome_from_json(const json& j) {
  try {
    MechanismOutcome o;
    for (const json& record : j.at("allocations")) o.allocations.push_back(allocation_from_json(record));
    o.payments = j.at("payments").get<std::vector<double>>();
    o.utilities = j.at("utilities").get<std::vector<double>>();
    o.outside_options = j.at("outside_options").get<std::vector<double>>();
    o.ir_satisfied = j.at("ir_satisfied").get<std::vector<bool>>();
    o.station_budget = j.at("station_budget").get<double>();
    return o;
  } catch (const json::exception& e) {
    throw InputError(std::string("bad mechanism outcome: ") + e.what());
  }
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

StationScenario load_scenario(const std::string& path) {
  return scenario_from_json(load_json(path));
}

bool has_allocations(const json& j) { return j.contains("allocations"); }

std::vector<Allocation> allocations_from_json(const json& j, int horizon) {
  std::vector<Allocation> allocations;
  try {
    for (const json& record : j.at("allocations")) {
      allocations.push_back(allocation_from_json(record));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("bad allocations array: ") + e.what());
  }
  for (const Allocation& a : allocations) {
    if (static_cast<int>(a.power_profile.size()) != horizon)
      throw InputError("allocation power_profile length does not match the horizon");
  }
  return allocations;
}

std::vector<EvType> load_reports(const std::string& path) {
  json j = load_json(path);
  const json& array = j.is_array() ? j : j.at("reports");
  if (!array.is_array()) throw InputError(path + ": expected an array of reports");
  std::vector<EvType> reports;
  for (const json& record : array) reports.push_back(type_from_json(record));
  if (reports.empty()) throw InputError(path + ": no reports");
  return reports;
}

std::vector<double> load_price_csv(const std::string& path, int expected_rows) {
  const auto rows = read_csv(path, "interval_index,price_usd_per_kwh");
  if (static_cast<int>(rows.size()) != expected_rows) {
    throw InputError(path + ": expected " + std::to_string(expected_rows) + " price rows, got " +
                     std::to_string(rows.size()));
  }
  std::vector<double> prices(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int line = static_cast<int>(i) + 2;
    if (rows[i].size() != 2)
      throw InputError(path + ":" + std::to_string(line) + ": expected 2 fields");
    const double index = parse_number(rows[i][0], path, line);
    if (index != static_cast<double>(i))
      throw InputError(path + ":" + std::to_string(line) + ": interval_index must be " +
                       std::to_string(i));
    prices[i] = parse_number(rows[i][1], path, line);
  }
  return prices;
}

std::vector<double> load_column_csv(const std::string& path, const std::string& header) {
  const auto rows = read_csv(path, header);
  std::vector<double> values;
  values.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int line = static_cast<int>(i) + 2;
    if (rows[i].size() != 1)
      throw InputError(path + ":" + std::to_string(line) + ": expected 1 field");
    values.push_back(parse_number(rows[i][0], path, line));
  }
  return values;
}

std::vector<std::pair<double, double>> load_pair_csv(const std::string& path,
                                                     const std::string& header) {
  const auto rows = read_csv(path, header);
  std::vector<std::pair<double, double>> values;
  values.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int line = static_cast<int>(i) + 2;
    if (rows[i].size() != 2)
      throw InputError(path + ":" + std::to_string(line) + ": expected 2 fields");
    values.emplace_back(parse_number(rows[i][0], path, line),
                        parse_number(rows[i][1], path, line));
  }
  return values;
}

std::string soc_trajectory_csv(const StationScenario& scenario,
                               const std::vector<Allocation>& allocations) {
  std::ostringstream out;
  out << "ev,interval_index,power_kw,soc_kwh\n";
  out.precision(12);
  for (std::size_t n = 0; n < allocations.size(); ++n) {
    const std::vector<double> soc = soc_trajectory(
        scenario.fleet[n].params, allocations[n].power_profile, scenario.interval_hours);
    for (int t = 0; t <= scenario.horizon; ++t) {
      const double power = t < scenario.horizon ? allocations[n].power_profile[t] : 0.0;
      out << n << ',' << t << ',' << power << ',' << soc[t] << '\n';
    }
  }
  return out.str();
}

void atomic_write(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << contents;
    if (!out.good()) throw InputError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw InputError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
}

}  // namespace v2g::io
