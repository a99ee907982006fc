#pragma once

#include <set>
#include <string>
#include <vector>

#include "adaem/core.hpp"
#include "adaem/harvest.hpp"

namespace adaem {

// One receding-horizon planning instance: robust (lower-bound) harvest
// estimates for the remaining intervals, the battery right now, and the
// constraint data. The critical mask usually comes from
// expected_activity_mask, with the current interval overwritten by the
// actually observed activity.
struct PlanningProblem {
    std::vector<double> worst_case_harvest_j;
    BatteryState initial;
    EnergyConfig config;
    EnergyAccuracyProfile profile;
    double a_min = 0.90;
    std::vector<bool> critical_mask;

    int horizon() const { return static_cast<int>(worst_case_harvest_j.size()); }
    void validate() const;
};

struct PlanResult {
    Plan plan;
    bool feasible = false;
    // Violations of the returned plan under the problem's own predictions.
    // All zero when feasible; a best-effort plan reports what remains.
    ViolationReport report;
    int iterations = 0;
};

// The charging optimizer. Starts from maximum-accuracy consumption with no
// charging, then alternates consumption reduction and deficit charging until
// the projected trajectory respects the floor and the terminal target, or no
// further move exists. Critical intervals never receive a charging flag.
PlanResult plan_horizon(const PlanningProblem& problem);

// Rolling-horizon step: re-optimize the remaining horizon from the battery
// state that actually materialized. problem_rest must be one interval shorter
// than the previous plan; its initial state is taken from new_state. The
// previous plan's tail is kept whenever it is still feasible and the fresh
// optimization does not beat it (fewer charges, or equal charges and more
// consumption), so decisions stay stable while predictions hold.
PlanResult replan(const Plan& previous, double observed_harvest_j, const BatteryState& new_state,
                  PlanningProblem problem_rest);

// True when any schedule at all can satisfy the constraints: the trajectory
// with every non-critical interval charging and everything consuming the
// minimum pointwise dominates every admissible trajectory, so checking it
// settles feasibility.
bool instance_feasible(const PlanningProblem& problem);

ViolationReport evaluate_plan(const Plan& plan, const PlanningProblem& problem);

// Battery trajectory for a fixed schedule under the problem's predictions,
// one level per interval (after that interval has elapsed).
std::vector<double> project_trajectory(const PlanningProblem& problem,
                                       const std::vector<bool>& charge_flags,
                                       const std::vector<double>& consumption_j);

struct ExpectedMask {
    std::vector<bool> critical;
    bool cold_start = false; // no history yet, mask is all-false
};

// Marks hour-of-day slots where the critical activity occurred on at least
// `fraction` of the observed days.
ExpectedMask expected_activity_mask(const ActivitySchedule& history, int horizon,
                                    int start_hour_of_day,
                                    const std::set<ActivityLabel>& critical_set,
                                    double fraction = 0.5);

void write_plan_csv(const std::string& path, const Plan& plan);

} // namespace adaem
