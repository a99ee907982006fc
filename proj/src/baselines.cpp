#include "adaem/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "adaem/errors.hpp"

namespace adaem {

OnDemandDecision on_demand_decide(const BatteryState& state, const EnergyConfig& config,
                                  bool currently_charging, const EnergyAccuracyProfile& profile,
                                  double a_fixed) {
    OnDemandDecision decision;
    decision.consumption_j = min_consumption_for(profile, a_fixed);
    decision.charge = state.energy_j < config.e_min_j
                      || (currently_charging && state.energy_j < config.e_target_j);
    return decision;
}

std::vector<double> energy_neutral_allocate(double daily_harvest_j, int horizon,
                                            const EnergyAccuracyProfile& profile) {
    if (daily_harvest_j < 0.0) {
        throw std::invalid_argument("energy_neutral_allocate: negative daily harvest");
    }
    if (horizon < 1) {
        throw std::invalid_argument("energy_neutral_allocate: horizon must be at least 1");
    }
    profile.validate();
    const double per_interval =
        std::min(daily_harvest_j / horizon, profile.points.back().first);
    return std::vector<double>(static_cast<std::size_t>(horizon), per_interval);
}

namespace {

bool trajectory_ok(const std::vector<double>& levels, const EnergyConfig& config) {
    for (double level : levels) {
        if (level < config.e_min_j - kFeasEps) return false;
    }
    return levels.back() >= config.e_target_j - kFeasEps;
}

// Depth-first enumeration of charging-flag vectors of a fixed cardinality.
// Levels are simulated with minimum allowed consumption, which dominates
// every admissible consumption choice, so a prefix that dips below the floor
// can be cut immediately and a leaf that reaches the terminal target is
// genuinely feasible. The consumption itself is assigned later, only for the
// winning flag vector.
class OracleSearch {
public:
    OracleSearch(const PlanningProblem& problem, double e_min_c)
        : p_(problem), e_min_c_(e_min_c), horizon_(problem.horizon()),
          flags_(static_cast<std::size_t>(horizon_), false) {
        suffix_harvest_.assign(static_cast<std::size_t>(horizon_) + 1, 0.0);
        suffix_slots_.assign(static_cast<std::size_t>(horizon_) + 1, 0);
        for (int t = horizon_ - 1; t >= 0; --t) {
            const auto i = static_cast<std::size_t>(t);
            suffix_harvest_[i] = suffix_harvest_[i + 1]
                                 + p_.config.harvest_efficiency * p_.worst_case_harvest_j[i];
            suffix_slots_[i] = suffix_slots_[i + 1] + (p_.critical_mask[i] ? 0 : 1);
        }
    }

    // Returns true when any feasible assignment of this cardinality exists;
    // best_flags() then holds the winner under (max min-gap, lex) order.
    bool run(int cardinality) {
        found_ = false;
        best_gap_ = -1;
        dfs(0, cardinality, p_.initial.energy_j);
        return found_;
    }

    const std::vector<bool>& best_flags() const { return best_flags_; }
    int evaluated() const { return evaluated_; }

private:
    void dfs(int pos, int budget, double level) {
        if (budget > suffix_slots_[static_cast<std::size_t>(pos)]) return;
        // Optimistic terminal bound: every future joule counted, no clamping.
        if (level + suffix_harvest_[static_cast<std::size_t>(pos)]
                + budget * p_.config.e_charge_per_interval_j
                - (horizon_ - pos) * e_min_c_
            < p_.config.e_target_j - kFeasEps) {
            return;
        }
        if (pos == horizon_) {
            ++evaluated_;
            if (budget != 0 || level < p_.config.e_target_j - kFeasEps) return;
            const int gap = min_intercharge_gap(flags_);
            if (!found_ || gap > best_gap_ || (gap == best_gap_ && flags_ < best_flags_)) {
                found_ = true;
                best_gap_ = gap;
                best_flags_ = flags_;
            }
            return;
        }
        const auto i = static_cast<std::size_t>(pos);
        const double inflow = p_.config.harvest_efficiency * p_.worst_case_harvest_j[i] - e_min_c_;

        const double without = std::clamp(level + inflow, 0.0, p_.config.e_max_j);
        if (without >= p_.config.e_min_j - kFeasEps) {
            dfs(pos + 1, budget, without);
        }
        if (budget > 0 && !p_.critical_mask[i]) {
            const double with_charge =
                std::clamp(level + inflow + p_.config.e_charge_per_interval_j, 0.0,
                           p_.config.e_max_j);
            if (with_charge >= p_.config.e_min_j - kFeasEps) {
                flags_[i] = true;
                dfs(pos + 1, budget - 1, with_charge);
                flags_[i] = false;
            }
        }
    }

    const PlanningProblem& p_;
    double e_min_c_;
    int horizon_;
    std::vector<bool> flags_;
    std::vector<double> suffix_harvest_;
    std::vector<int> suffix_slots_;
    bool found_ = false;
    int best_gap_ = -1;
    std::vector<bool> best_flags_;
    int evaluated_ = 0;
};

double step_down_bp(const EnergyAccuracyProfile& profile, double current, double lowest) {
    double next = current;
    for (auto it = profile.points.rbegin(); it != profile.points.rend(); ++it) {
        if (it->first < current - kFeasEps) {
            next = it->first;
            break;
        }
    }
    return std::max(next, lowest);
}

double step_up_bp(const EnergyAccuracyProfile& profile, double current) {
    for (const auto& [consumption, accuracy] : profile.points) {
        if (consumption > current + kFeasEps) return consumption;
    }
    return current;
}

// Consumption assignment for a fixed feasible flag vector: start at maximum
// accuracy, lower breakpoints at or before the earliest remaining violation
// (highest consumption first, earliest index on ties), then hand all the
// slack back greedily from the earliest interval on.
std::vector<double> assign_consumption(const PlanningProblem& problem,
                                       const std::vector<bool>& flags, double e_min_c) {
    const int horizon = problem.horizon();
    const double e_max_c = problem.profile.points.back().first;
    std::vector<double> consumption(static_cast<std::size_t>(horizon), e_max_c);

    while (true) {
        const std::vector<double> levels = project_trajectory(problem, flags, consumption);
        int anchor = horizon - 1;
        bool violated = levels.back() < problem.config.e_target_j - kFeasEps;
        for (int t = 0; t < horizon; ++t) {
            if (levels[static_cast<std::size_t>(t)] < problem.config.e_min_j - kFeasEps) {
                anchor = t;
                violated = true;
                break;
            }
        }
        if (!violated) break;

        int pick = -1;
        for (int t = 0; t <= anchor; ++t) {
            if (consumption[static_cast<std::size_t>(t)] > e_min_c + kFeasEps
                && (pick < 0
                    || consumption[static_cast<std::size_t>(t)]
                           > consumption[static_cast<std::size_t>(pick)] + kFeasEps)) {
                pick = t;
            }
        }
        if (pick < 0) break; // cannot happen for flags vetted by the search
        consumption[static_cast<std::size_t>(pick)] =
            step_down_bp(problem.profile, consumption[static_cast<std::size_t>(pick)], e_min_c);
    }

    for (int t = 0; t < horizon; ++t) {
        while (consumption[static_cast<std::size_t>(t)] < e_max_c - kFeasEps) {
            const double raised = step_up_bp(problem.profile, consumption[static_cast<std::size_t>(t)]);
            const double previous = consumption[static_cast<std::size_t>(t)];
            consumption[static_cast<std::size_t>(t)] = raised;
            if (!trajectory_ok(project_trajectory(problem, flags, consumption), problem.config)) {
                consumption[static_cast<std::size_t>(t)] = previous;
                break;
            }
        }
    }
    return consumption;
}

} // namespace

PlanResult optimal_oracle(const HarvestTrace& actual_harvest, const BatteryState& initial,
                          const EnergyConfig& config, const EnergyAccuracyProfile& profile,
                          double a_min, const std::vector<bool>& critical_mask) {
    PlanningProblem problem;
    problem.worst_case_harvest_j = actual_harvest.values_j;
    problem.initial = initial;
    problem.config = config;
    problem.profile = profile;
    problem.a_min = a_min;
    problem.critical_mask = critical_mask;
    problem.validate();

    if (!instance_feasible(problem)) {
        // No schedule exists; reuse the planner's degraded schedule so the
        // simulator still has something sensible to execute.
        PlanResult fallback = plan_horizon(problem);
        fallback.feasible = false;
        return fallback;
    }

    const double e_min_c = min_consumption_for(profile, a_min);
    OracleSearch search(problem, e_min_c);

    int non_critical = 0;
    for (bool critical : critical_mask) {
        if (!critical) ++non_critical;
    }
    PlanResult result;
    for (int cardinality = 0; cardinality <= non_critical; ++cardinality) {
        if (search.run(cardinality)) {
            Plan& plan = result.plan;
            plan.first_interval_index = initial.interval_index;
            plan.charge_flags = search.best_flags();
            plan.consumption_j = assign_consumption(problem, plan.charge_flags, e_min_c);
            plan.projected_battery_j =
                project_trajectory(problem, plan.charge_flags, plan.consumption_j);
            result.feasible = true;
            result.report = evaluate_plan(plan, problem);
            result.iterations = search.evaluated();
            return result;
        }
    }
    // Unreachable: instance_feasible vetted the all-slots assignment above.
    PlanResult fallback = plan_horizon(problem);
    fallback.feasible = false;
    return fallback;
}

} // namespace adaem
