#pragma once

#include <vector>

#include "adaem/core.hpp"
#include "adaem/harvest.hpp"
#include "adaem/planner.hpp"

namespace adaem {

struct OnDemandDecision {
    bool charge = false;
    double consumption_j = 0.0;
};

// Reactive hysteresis policy: run at a fixed accuracy, start charging when
// the battery crosses the floor and keep charging until it reaches the
// target. Deliberately blind to critical activities.
OnDemandDecision on_demand_decide(const BatteryState& state, const EnergyConfig& config,
                                  bool currently_charging, const EnergyAccuracyProfile& profile,
                                  double a_fixed);

// Spread the day's harvest uniformly over the horizon, capped at the
// profile's maximum useful consumption. Never charges.
std::vector<double> energy_neutral_allocate(double daily_harvest_j, int horizon,
                                            const EnergyAccuracyProfile& profile);

// Exhaustive reference: the fewest charging intervals that keep the actual
// (perfectly known) harvest trajectory feasible, preferring sparse session
// spacing and then the lexicographically earliest flag vector. Consumption
// is raised greedily afterwards, earliest interval first. Infeasible
// instances fall back to the planner's best-effort schedule.
PlanResult optimal_oracle(const HarvestTrace& actual_harvest, const BatteryState& initial,
                          const EnergyConfig& config, const EnergyAccuracyProfile& profile,
                          double a_min, const std::vector<bool>& critical_mask);

} // namespace adaem
