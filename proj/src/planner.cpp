#include "adaem/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "adaem/csv.hpp"
#include "adaem/errors.hpp"

namespace adaem {

void PlanningProblem::validate() const {
    config.validate();
    profile.validate();
    if (worst_case_harvest_j.empty()) {
        throw ConfigError("planning problem must cover at least one interval");
    }
    if (critical_mask.size() != worst_case_harvest_j.size()) {
        throw ConfigError("critical mask and prediction lengths differ");
    }
    for (double h : worst_case_harvest_j) {
        if (h < 0.0) throw ConfigError("worst-case harvest predictions must be non-negative");
    }
    if (initial.energy_j < 0.0 || initial.energy_j > config.capacity_j) {
        throw ConfigError("initial battery level outside the physical range");
    }
    min_consumption_for(profile, a_min); // throws when a_min is unreachable
}

namespace {

// Sentinel meaning "the trajectory only misses the terminal target".
constexpr int kTerminalViolation = -2;
constexpr int kNoViolation = -1;

void project(Plan& plan, const PlanningProblem& p) {
    BatteryState state = p.initial;
    for (std::size_t t = 0; t < plan.charge_flags.size(); ++t) {
        state = battery_step(state, p.config, p.worst_case_harvest_j[t], plan.charge_flags[t],
                             plan.consumption_j[t]).next;
        plan.projected_battery_j[t] = state.energy_j;
    }
}

int first_violation(const Plan& plan, const PlanningProblem& p) {
    for (std::size_t t = 0; t < plan.projected_battery_j.size(); ++t) {
        if (plan.projected_battery_j[t] < p.config.e_min_j - kFeasEps) {
            return static_cast<int>(t);
        }
    }
    if (plan.projected_battery_j.back() < p.config.e_target_j - kFeasEps) {
        return kTerminalViolation;
    }
    return kNoViolation;
}

// Largest profile breakpoint strictly below the current consumption, floored
// at `lowest`. Returns current when no step down exists.
double step_down(const EnergyAccuracyProfile& profile, double current, double lowest) {
    double next = current;
    for (auto it = profile.points.rbegin(); it != profile.points.rend(); ++it) {
        if (it->first < current - kFeasEps) {
            next = it->first;
            break;
        }
    }
    return std::max(next, lowest);
}

// Index of the highest-consumption interval at or before `anchor` that can
// still step down toward `lowest`; earliest index wins ties.
int pick_reducible(const std::vector<double>& consumption, int anchor, double lowest) {
    int best = -1;
    for (int i = 0; i <= anchor; ++i) {
        if (consumption[static_cast<std::size_t>(i)] > lowest + kFeasEps
            && (best < 0
                || consumption[static_cast<std::size_t>(i)]
                       > consumption[static_cast<std::size_t>(best)] + kFeasEps)) {
            best = i;
        }
    }
    return best;
}

bool anchor_satisfied(const Plan& plan, const PlanningProblem& p, int violation) {
    if (violation == kTerminalViolation) {
        return plan.projected_battery_j.back() >= p.config.e_target_j - kFeasEps;
    }
    return plan.projected_battery_j[static_cast<std::size_t>(violation)]
           >= p.config.e_min_j - kFeasEps;
}

// Start index of the latest run of `needed` consecutive intervals that are
// all non-critical and not yet flagged, with the run starting at or before
// `latest_start`. Returns -1 when no such run exists. Keeping a charging
// session contiguous and as late as possible both spaces sessions apart and
// leaves the early intervals free for consumption.
int latest_window(const Plan& plan, const PlanningProblem& p, int needed, int latest_start) {
    const int horizon = p.horizon();
    int run = 0;
    int best = -1;
    for (int t = 0; t < horizon; ++t) {
        const auto i = static_cast<std::size_t>(t);
        run = (!p.critical_mask[i] && !plan.charge_flags[i]) ? run + 1 : 0;
        const int start = t - needed + 1;
        if (run >= needed && start <= latest_start) best = start;
    }
    return best;
}

// Best-effort degradation once the instance is infeasible: keep stepping
// consumption below the accuracy requirement, down to the lowest breakpoint,
// while that still lifts intervals off the energy floor. Trading an accuracy
// violation for a floor violation keeps the battery alive, which is the
// behavior the simulator needs to keep counting.
void degrade_for_floor(Plan& plan, const PlanningProblem& p) {
    const double lowest = p.profile.points.front().first;
    while (true) {
        int v = kNoViolation;
        for (std::size_t t = 0; t < plan.projected_battery_j.size(); ++t) {
            if (plan.projected_battery_j[t] < p.config.e_min_j - kFeasEps) {
                v = static_cast<int>(t);
                break;
            }
        }
        if (v == kNoViolation) return;
        const int i = pick_reducible(plan.consumption_j, v, lowest);
        if (i < 0) return;
        plan.consumption_j[static_cast<std::size_t>(i)] =
            step_down(p.profile, plan.consumption_j[static_cast<std::size_t>(i)], lowest);
        project(plan, p);
    }
}

} // namespace

std::vector<double> project_trajectory(const PlanningProblem& problem,
                                       const std::vector<bool>& charge_flags,
                                       const std::vector<double>& consumption_j) {
    Plan scratch;
    scratch.charge_flags = charge_flags;
    scratch.consumption_j = consumption_j;
    scratch.projected_battery_j.resize(charge_flags.size());
    scratch.first_interval_index = problem.initial.interval_index;
    project(scratch, problem);
    return scratch.projected_battery_j;
}

ViolationReport evaluate_plan(const Plan& plan, const PlanningProblem& problem) {
    ViolationReport report;
    const std::size_t n = plan.charge_flags.size();
    if (n == 0) return report;
    for (std::size_t t = 0; t < n; ++t) {
        if (plan.projected_battery_j[t] < problem.config.e_min_j - kFeasEps) {
            ++report.energy_floor_violations;
        }
        if (accuracy_of(problem.profile, plan.consumption_j[t]) < problem.a_min - kFeasEps) {
            ++report.accuracy_violations;
        }
        if (plan.charge_flags[t] && problem.critical_mask[t]) {
            ++report.critical_charging_violations;
        }
    }
    report.terminal_violation =
        plan.projected_battery_j.back() < problem.config.e_target_j - kFeasEps;
    return report;
}

bool instance_feasible(const PlanningProblem& problem) {
    const double e_min_c = min_consumption_for(problem.profile, problem.a_min);
    Plan best;
    best.first_interval_index = problem.initial.interval_index;
    best.charge_flags.resize(problem.worst_case_harvest_j.size());
    for (std::size_t t = 0; t < best.charge_flags.size(); ++t) {
        best.charge_flags[t] = !problem.critical_mask[t];
    }
    best.consumption_j.assign(best.charge_flags.size(), e_min_c);
    best.projected_battery_j.resize(best.charge_flags.size());
    project(best, problem);
    return first_violation(best, problem) == kNoViolation;
}

PlanResult plan_horizon(const PlanningProblem& problem) {
    problem.validate();
    const int horizon = problem.horizon();
    const double e_min_c = min_consumption_for(problem.profile, problem.a_min);
    const double e_max_c = problem.profile.points.back().first;

    PlanResult result;
    Plan& plan = result.plan;
    plan.first_interval_index = problem.initial.interval_index;
    plan.charge_flags.assign(static_cast<std::size_t>(horizon), false);
    plan.consumption_j.assign(static_cast<std::size_t>(horizon), e_max_c);
    plan.projected_battery_j.assign(static_cast<std::size_t>(horizon), 0.0);
    project(plan, problem);

    // Each pass fixes the earliest remaining violation, first by lowering
    // consumption at or before it, then by scheduling charging. Levels only
    // ever rise, so fixed prefixes stay fixed and the pass count is bounded
    // by the horizon plus the few charging rounds a terminal gap needs.
    const int iteration_cap = 4 * horizon + 8;
    while (true) {
        const int violation = first_violation(plan, problem);
        if (violation == kNoViolation) {
            result.feasible = true;
            break;
        }
        if (++result.iterations > iteration_cap) break;
        const int anchor = violation == kTerminalViolation ? horizon - 1 : violation;

        bool reduced = false;
        while (!anchor_satisfied(plan, problem, violation)) {
            const int i = pick_reducible(plan.consumption_j, anchor, e_min_c);
            if (i < 0) break;
            plan.consumption_j[static_cast<std::size_t>(i)] =
                step_down(problem.profile, plan.consumption_j[static_cast<std::size_t>(i)], e_min_c);
            reduced = true;
            project(plan, problem);
        }
        if (anchor_satisfied(plan, problem, violation)) continue;

        // Consumption alone cannot fix this violation: cover the whole
        // remaining deficit with charging intervals. A floor violation needs
        // at least one charge at or before it, so the session window may
        // start no later than the anchor; a terminal shortfall can sit
        // anywhere, so the window simply goes as late as it fits.
        const double deficit =
            problem.config.e_target_j - plan.projected_battery_j[static_cast<std::size_t>(horizon - 1)];
        int needed = 1;
        if (deficit > 0.0) {
            needed = std::max(1, static_cast<int>(
                                     std::ceil(deficit / problem.config.e_charge_per_interval_j
                                               - kFeasEps)));
        }
        const int latest_start = violation == kTerminalViolation ? horizon - 1 : anchor;
        int placed = 0;
        int placed_in_scope = 0;
        const int window = latest_window(plan, problem, needed, latest_start);
        if (window >= 0) {
            for (int t = window; t < window + needed; ++t) {
                plan.charge_flags[static_cast<std::size_t>(t)] = true;
            }
            placed = needed;
            placed_in_scope = needed;
        } else {
            // No contiguous session fits: fill from the anchor outward.
            for (int t = anchor; t < horizon && placed < needed; ++t) {
                if (!problem.critical_mask[static_cast<std::size_t>(t)]
                    && !plan.charge_flags[static_cast<std::size_t>(t)]) {
                    plan.charge_flags[static_cast<std::size_t>(t)] = true;
                    ++placed;
                    if (t <= anchor) ++placed_in_scope;
                }
            }
            for (int t = anchor - 1; t >= 0 && placed < needed; --t) {
                if (!problem.critical_mask[static_cast<std::size_t>(t)]
                    && !plan.charge_flags[static_cast<std::size_t>(t)]) {
                    plan.charge_flags[static_cast<std::size_t>(t)] = true;
                    ++placed;
                    ++placed_in_scope;
                }
            }
        }
        if (placed == 0 && !reduced) break; // no move left, instance infeasible
        if (violation != kTerminalViolation && placed_in_scope == 0 && !reduced) {
            break; // the floor violation is out of reach of any charge slot
        }
        project(plan, problem);
    }

    if (!result.feasible) {
        degrade_for_floor(plan, problem);
    }
    result.report = evaluate_plan(plan, problem);
    return result;
}

namespace {

double total_consumption(const Plan& plan) {
    double total = 0.0;
    for (double c : plan.consumption_j) total += c;
    return total;
}

int flag_count(const Plan& plan) {
    int count = 0;
    for (bool f : plan.charge_flags) {
        if (f) ++count;
    }
    return count;
}

} // namespace

PlanResult replan(const Plan& previous, double observed_harvest_j, const BatteryState& new_state,
                  PlanningProblem problem_rest) {
    if (observed_harvest_j < 0.0) {
        throw std::invalid_argument("replan: observed harvest must be non-negative");
    }
    if (problem_rest.horizon() != static_cast<int>(previous.charge_flags.size()) - 1) {
        throw std::invalid_argument("replan: remaining horizon must shrink by exactly one");
    }
    problem_rest.initial = new_state;
    PlanResult fresh = plan_horizon(problem_rest);

    // Carrying the previous plan's tail forward keeps execution stable when
    // reality tracks the predictions; the freshly optimized plan takes over
    // only when it actually improves something, by charging less or by
    // spending the surplus on higher consumption at equal charging effort.
    PlanResult kept;
    kept.plan.first_interval_index = previous.first_interval_index + 1;
    kept.plan.charge_flags.assign(previous.charge_flags.begin() + 1, previous.charge_flags.end());
    kept.plan.consumption_j.assign(previous.consumption_j.begin() + 1,
                                   previous.consumption_j.end());
    kept.plan.projected_battery_j =
        project_trajectory(problem_rest, kept.plan.charge_flags, kept.plan.consumption_j);
    kept.report = evaluate_plan(kept.plan, problem_rest);
    kept.feasible =
        kept.report.total_interval_violations() == 0 && !kept.report.terminal_violation;
    if (!kept.feasible) return fresh;

    const bool fresh_improves =
        fresh.feasible
        && (flag_count(fresh.plan) < flag_count(kept.plan)
            || (flag_count(fresh.plan) == flag_count(kept.plan)
                && total_consumption(fresh.plan) > total_consumption(kept.plan) + kFeasEps));
    return fresh_improves ? fresh : kept;
}

ExpectedMask expected_activity_mask(const ActivitySchedule& history, int horizon,
                                    int start_hour_of_day,
                                    const std::set<ActivityLabel>& critical_set, double fraction) {
    if (horizon < 0) throw std::invalid_argument("expected_activity_mask: negative horizon");
    if (fraction < 0.0 || fraction > 1.0) {
        throw ConfigError("expected_activity_mask: fraction must be in [0, 1]");
    }
    const int per_day = history.intervals_per_day;
    const int days = static_cast<int>(history.labels.size()) / per_day;

    ExpectedMask mask;
    mask.critical.assign(static_cast<std::size_t>(horizon), false);
    if (days == 0) {
        mask.cold_start = true;
        return mask;
    }

    std::vector<int> counts(static_cast<std::size_t>(per_day), 0);
    for (int d = 0; d < days; ++d) {
        for (int h = 0; h < per_day; ++h) {
            const auto label = history.labels[static_cast<std::size_t>(d * per_day + h)];
            if (critical_set.count(label) > 0) ++counts[static_cast<std::size_t>(h)];
        }
    }
    for (int t = 0; t < horizon; ++t) {
        const int hour = (start_hour_of_day + t) % per_day;
        mask.critical[static_cast<std::size_t>(t)] =
            static_cast<double>(counts[static_cast<std::size_t>(hour)])
            >= fraction * days - kFeasEps;
    }
    return mask;
}

void write_plan_csv(const std::string& path, const Plan& plan) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "interval,charge,consumption_j,projected_battery_j\n";
    for (std::size_t t = 0; t < plan.charge_flags.size(); ++t) {
        out << plan.first_interval_index + static_cast<int>(t) << ','
            << (plan.charge_flags[t] ? 1 : 0) << ',' << fmt_double(plan.consumption_j[t]) << ','
            << fmt_double(plan.projected_battery_j[t]) << '\n';
    }
}

} // namespace adaem
