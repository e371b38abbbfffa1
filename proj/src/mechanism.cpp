#include "v2g/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "v2g/errors.hpp"

namespace v2g {

namespace {

StationScenario with_reports(const StationScenario& scenario, const std::vector<EvType>& reports) {
  if (reports.size() != scenario.fleet.size())
    throw InputError("mechanism: one report per EV required");
  StationScenario reported = scenario;
  for (std::size_t n = 0; n < reports.size(); ++n) {
    reported.fleet[n].type = reports[n];
    reported.fleet[n].type.validate(reported.fleet[n].params, reported.horizon);
  }
  return reported;
}

StationScenario without_ev(const StationScenario& scenario, int n) {
  StationScenario reduced = scenario;
  reduced.fleet.erase(reduced.fleet.begin() + n);
  return reduced;
}

ScheduleSolution solve_welfare(const StationScenario& scenario, const MechanismConfig& config) {
  if (config.solver == SolverKind::kExact) return solve_exact(scenario, config.exact);
  return run_admm(scenario, config.admm);
}

double ev_total_cost(const StationScenario& scenario, int n, const Allocation& alloc) {
  const Ev& ev = scenario.fleet[n];
  return ev_cost(ev.params, ev.type, alloc, scenario.interval_hours) +
         energy_cost(scenario.prices, alloc.power_profile, scenario.interval_hours);
}

// Eq.-style externality payment given the already-solved full allocation.
double payment_from_solutions(const StationScenario& reported, int n,
                              const std::vector<Allocation>& full,
                              const std::vector<Allocation>& leave_one_out) {
  const double dt = reported.interval_hours;
  double payment = energy_cost(reported.prices, full[n].power_profile, dt);
  int reduced_index = 0;
  for (int j = 0; j < reported.num_evs(); ++j) {
    if (j == n) continue;
    payment += ev_total_cost(reported, j, full[j]) -
               ev_total_cost(reported, j, leave_one_out[reduced_index]);
    ++reduced_index;
  }
  return payment;
}

void maybe_warn_admm(const MechanismConfig& config) {
  if (config.solver == SolverKind::kAdmm && config.warn_on_admm) {
    std::cerr << "warning: VCG computed with the ADMM solver; "
                 "incentive guarantees are approximate\n";
  }
}

}  // namespace

std::vector<Allocation> vcg_allocation(const StationScenario& scenario,
                                       const std::vector<EvType>& reports,
                                       const MechanismConfig& config) {
  maybe_warn_admm(config);
  return solve_welfare(with_reports(scenario, reports), config).allocations;
}

double vcg_payment(const StationScenario& scenario, const std::vector<EvType>& reports, int n,
                   const MechanismConfig& config) {
  if (n < 0 || n >= scenario.num_evs()) throw InputError("mechanism: EV index out of range");
  maybe_warn_admm(config);
  const StationScenario reported = with_reports(scenario, reports);
  const std::vector<Allocation> full = solve_welfare(reported, config).allocations;
  std::vector<Allocation> loo;
  if (reported.num_evs() > 1) {
    loo = solve_welfare(without_ev(reported, n), config).allocations;
  }
  return payment_from_solutions(reported, n, full, loo);
}

double outside_option_utility(const Ev& ev) {
  const double gap = ev.type.desired_soc - ev.params.initial_soc;
  return -ev.type.soc_inflexibility * gap * gap;
}

MechanismOutcome run_vcg(const StationScenario& scenario, const std::vector<EvType>& reports,
                         const MechanismConfig& config) {
  scenario.validate();
  maybe_warn_admm(config);
  const int num_evs = scenario.num_evs();
  const StationScenario reported = with_reports(scenario, reports);
  const std::vector<Allocation> full = solve_welfare(reported, config).allocations;

  MechanismOutcome outcome;
  outcome.allocations = full;
  outcome.payments.resize(num_evs);
  outcome.utilities.resize(num_evs);
  outcome.outside_options.resize(num_evs);
  outcome.ir_satisfied.resize(num_evs);

  double total_energy = 0.0;
  for (int n = 0; n < num_evs; ++n) {
    std::vector<Allocation> loo;
    if (num_evs > 1) {
      loo = solve_welfare(without_ev(reported, n), config).allocations;
    }
    outcome.payments[n] = payment_from_solutions(reported, n, full, loo);

    const Ev& ev = scenario.fleet[n];  // utilities use the true types
    outcome.utilities[n] =
        -ev_cost(ev.params, ev.type, full[n], scenario.interval_hours) - outcome.payments[n];
    outcome.outside_options[n] = outside_option_utility(ev);
    outcome.ir_satisfied[n] =
        outcome.utilities[n] >= outcome.outside_options[n] - config.ir_tolerance;
    total_energy += energy_cost(scenario.prices, full[n].power_profile, scenario.interval_hours);
    outcome.station_budget += outcome.payments[n];
  }
  outcome.station_budget -= total_energy;
  return outcome;
}

std::vector<MisreportPoint> misreport_sweep(const StationScenario& scenario, int n,
                                            const std::vector<EvType>& report_grid,
                                            PaymentRule rule, const MechanismConfig& config) {
  scenario.validate();
  if (n < 0 || n >= scenario.num_evs()) throw InputError("mechanism: EV index out of range");
  if (report_grid.empty()) throw InputError("mechanism: report grid must be nonempty");
  maybe_warn_admm(config);

  // The leave-one-out welfare solve does not involve EV n's report; share it.
  std::vector<Allocation> loo;
  if (rule == PaymentRule::kVcg && scenario.num_evs() > 1) {
    loo = solve_welfare(without_ev(scenario, n), config).allocations;
  }

  std::vector<MisreportPoint> surface;
  surface.reserve(report_grid.size());
  for (const EvType& report : report_grid) {
    std::vector<EvType> reports;
    reports.reserve(scenario.fleet.size());
    for (const Ev& ev : scenario.fleet) reports.push_back(ev.type);
    reports[n] = report;

    const StationScenario reported = with_reports(scenario, reports);
    const std::vector<Allocation> full = solve_welfare(reported, config).allocations;

    double payment = 0.0;
    switch (rule) {
      case PaymentRule::kVcg:
        payment = payment_from_solutions(reported, n, full, loo);
        break;
      case PaymentRule::kNone:
        payment = 0.0;
        break;
      case PaymentRule::kEnergyAtMarket:
        payment =
            energy_cost(scenario.prices, full[n].power_profile, scenario.interval_hours);
        break;
    }

    const Ev& ev = scenario.fleet[n];
    const double utility =
        -ev_cost(ev.params, ev.type, full[n], scenario.interval_hours) - payment;
    surface.push_back({report, utility});
  }
  return surface;
}

std::vector<EvType> default_misreport_grid(const Ev& ev, int horizon) {
  std::vector<EvType> grid;
  for (int shift : {-4, -2, 0, 2, 4}) {
    for (double scale : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      EvType report = ev.type;
      report.desired_disconnect =
          std::clamp(ev.type.desired_disconnect + shift, 0, horizon);
      report.temporal_inflexibility = ev.type.temporal_inflexibility * scale;
      grid.push_back(report);
    }
  }
  return grid;
}

}  // namespace v2g
