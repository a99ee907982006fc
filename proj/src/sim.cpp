#include "adaem/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <stdexcept>
#include <thread>
#include <utility>

#include "adaem/csv.hpp"
#include "adaem/errors.hpp"
#include "adaem/rng.hpp"

namespace adaem {

namespace {

constexpr std::uint64_t kUserActivityStream = 0xace0;
constexpr std::uint64_t kModelStream = 0x3a0d;

bool is_critical(const SimParams& params, ActivityLabel label) {
    return params.critical_set.count(label) > 0;
}

// Append one executed interval to the day record and advance the battery.
void apply_interval(DayResult& day, PolicyState& state, const SimParams& params, int t,
                    double actual_harvest_j, bool charge, double consumption_j,
                    bool critical_now) {
    const EnergyConfig& cfg = params.energy;
    BatteryState before{state.battery.energy_j, t};
    BatteryStepResult step = battery_step(before, cfg, actual_harvest_j, charge, consumption_j);

    const double unclamped = before.energy_j + cfg.harvest_efficiency * actual_harvest_j
                             + (charge ? cfg.e_charge_per_interval_j : 0.0) - consumption_j;
    if (unclamped < 0.0) day.underflow_j += -unclamped;
    day.overflow_j += step.overflow_j;

    state.battery.energy_j = step.next.energy_j;
    state.battery.interval_index = step.next.interval_index;

    const double acc = accuracy_of(params.profile, consumption_j);
    day.charge_flags.push_back(charge);
    day.consumption_j.push_back(consumption_j);
    day.accuracy.push_back(acc);
    day.battery_j.push_back(step.next.energy_j);
    day.harvest_j += actual_harvest_j;

    if (step.next.energy_j < cfg.e_min_j - kFeasEps) day.report.energy_floor_violations += 1;
    if (acc < params.a_min - kFeasEps) day.report.accuracy_violations += 1;
    if (charge && critical_now) day.report.critical_charging_violations += 1;
}

void finalize_day(DayResult& day, const SimParams& params) {
    const EnergyConfig& cfg = params.energy;
    day.report.terminal_violation = day.battery_j.back() < cfg.e_target_j - kFeasEps;
    int charges = 0;
    for (bool f : day.charge_flags) charges += f ? 1 : 0;
    day.charging_energy_j = cfg.e_charge_per_interval_j * charges;
    day.min_gap = min_intercharge_gap(day.charge_flags);
    day.savings_j = cfg.harvest_efficiency * day.harvest_j - day.overflow_j;
    double sum = 0.0;
    for (double a : day.accuracy) sum += a;
    day.mean_accuracy = day.accuracy.empty() ? 0.0 : sum / static_cast<double>(day.accuracy.size());
}

ActivitySchedule schedule_prefix(const ActivitySchedule& schedule, int days) {
    ActivitySchedule out;
    out.intervals_per_day = schedule.intervals_per_day;
    out.interval_seconds = schedule.interval_seconds;
    out.start_epoch_s = schedule.start_epoch_s;
    const std::size_t n = static_cast<std::size_t>(days) * static_cast<std::size_t>(schedule.intervals_per_day);
    out.labels.assign(schedule.labels.begin(), schedule.labels.begin() + static_cast<std::ptrdiff_t>(n));
    out.outdoor.assign(schedule.outdoor.begin(), schedule.outdoor.begin() + static_cast<std::ptrdiff_t>(n));
    out.weekend.assign(schedule.weekend.begin(), schedule.weekend.begin() + days);
    return out;
}

DayResult run_adaem_day(const SimParams& params, const UserTraces& traces,
                        const TreeEnsemble* model, int day_index, PolicyState& state) {
    const int horizon = params.energy.horizon_intervals;
    const int base = day_index * horizon;
    DayResult day;
    day.battery_j.push_back(state.battery.energy_j);

    // Hour-of-day criticality expected from past behavior; the current
    // interval is always overridden with what the wearer is actually doing.
    std::vector<bool> expected(static_cast<std::size_t>(horizon), false);
    if (day_index > 0) {
        ExpectedMask mask = expected_activity_mask(schedule_prefix(traces.activities, day_index),
                                                   horizon, 0, params.critical_set,
                                                   params.mask_fraction);
        expected = mask.critical;
    }

    auto critical_at = [&](int t) {
        return is_critical(params, traces.activities.labels[static_cast<std::size_t>(base + t)]);
    };

    auto make_problem = [&](int from) {
        PlanningProblem problem;
        const int steps = horizon - from;
        if (params.ideal_predictions || model == nullptr) {
            problem.worst_case_harvest_j.assign(
                traces.harvest.values_j.begin() + base + from,
                traces.harvest.values_j.begin() + base + horizon);
        } else {
            HarvestTrace seen;
            seen.interval_seconds = traces.harvest.interval_seconds;
            seen.start_epoch_s = traces.harvest.start_epoch_s;
            seen.values_j.assign(traces.harvest.values_j.begin(),
                                 traces.harvest.values_j.begin() + base + from);
            problem.worst_case_harvest_j = robust_forecast(*model, seen, traces.activities,
                                                           base + from, steps, params.k_sigma);
        }
        problem.initial = BatteryState{state.battery.energy_j, from};
        problem.config = params.energy;
        problem.profile = params.profile;
        problem.a_min = params.a_min;
        problem.critical_mask.resize(static_cast<std::size_t>(steps));
        problem.critical_mask[0] = critical_at(from);
        for (int i = 1; i < steps; ++i) {
            problem.critical_mask[static_cast<std::size_t>(i)] =
                expected[static_cast<std::size_t>(from + i)];
        }
        return problem;
    };

    PlanResult current = plan_horizon(make_problem(0));
    day.planning_feasible = current.feasible;

    for (int t = 0; t < horizon; ++t) {
        const double actual = traces.harvest.values_j[static_cast<std::size_t>(base + t)];
        const bool charge = current.plan.charge_flags[0];
        const double cons = current.plan.consumption_j[0];
        apply_interval(day, state, params, t, actual, charge, cons, critical_at(t));
        if (t + 1 < horizon) {
            current = replan(current.plan, actual, BatteryState{state.battery.energy_j, t + 1},
                             make_problem(t + 1));
            day.planning_feasible = day.planning_feasible && current.feasible;
        }
    }
    finalize_day(day, params);
    return day;
}

DayResult run_oracle_day(const SimParams& params, const UserTraces& traces, int day_index,
                         PolicyState& state) {
    const int horizon = params.energy.horizon_intervals;
    const int base = day_index * horizon;
    DayResult day;
    day.battery_j.push_back(state.battery.energy_j);

    HarvestTrace actual;
    actual.interval_seconds = traces.harvest.interval_seconds;
    actual.start_epoch_s = traces.harvest.start_epoch_s + static_cast<std::int64_t>(base)
                           * static_cast<std::int64_t>(traces.harvest.interval_seconds);
    actual.values_j.assign(traces.harvest.values_j.begin() + base,
                           traces.harvest.values_j.begin() + base + horizon);

    std::vector<bool> critical(static_cast<std::size_t>(horizon));
    for (int t = 0; t < horizon; ++t) {
        critical[static_cast<std::size_t>(t)] =
            is_critical(params, traces.activities.labels[static_cast<std::size_t>(base + t)]);
    }

    PlanResult plan = optimal_oracle(actual, BatteryState{state.battery.energy_j, 0},
                                     params.energy, params.profile, params.a_min, critical);
    day.planning_feasible = plan.feasible;

    for (int t = 0; t < horizon; ++t) {
        const auto i = static_cast<std::size_t>(t);
        apply_interval(day, state, params, t, actual.values_j[i], plan.plan.charge_flags[i],
                       plan.plan.consumption_j[i], critical[i]);
    }
    finalize_day(day, params);
    return day;
}

DayResult run_on_demand_day(const SimParams& params, const UserTraces& traces, int day_index,
                            PolicyState& state) {
    const int horizon = params.energy.horizon_intervals;
    const int base = day_index * horizon;
    DayResult day;
    day.battery_j.push_back(state.battery.energy_j);

    for (int t = 0; t < horizon; ++t) {
        const double actual = traces.harvest.values_j[static_cast<std::size_t>(base + t)];
        OnDemandDecision decision = on_demand_decide(BatteryState{state.battery.energy_j, t},
                                                     params.energy, state.charging,
                                                     params.profile, params.a_min);
        state.charging = decision.charge;
        const bool critical_now =
            is_critical(params, traces.activities.labels[static_cast<std::size_t>(base + t)]);
        apply_interval(day, state, params, t, actual, decision.charge, decision.consumption_j,
                       critical_now);
    }
    finalize_day(day, params);
    return day;
}

DayResult run_energy_neutral_day(const SimParams& params, const UserTraces& traces,
                                 int day_index, PolicyState& state) {
    const int horizon = params.energy.horizon_intervals;
    const int base = day_index * horizon;
    DayResult day;
    day.battery_j.push_back(state.battery.energy_j);

    double daily = 0.0;
    for (int t = 0; t < horizon; ++t) {
        daily += traces.harvest.values_j[static_cast<std::size_t>(base + t)];
    }
    std::vector<double> cons = energy_neutral_allocate(daily, horizon, params.profile);

    for (int t = 0; t < horizon; ++t) {
        const double actual = traces.harvest.values_j[static_cast<std::size_t>(base + t)];
        const bool critical_now =
            is_critical(params, traces.activities.labels[static_cast<std::size_t>(base + t)]);
        apply_interval(day, state, params, t, actual, false, cons[static_cast<std::size_t>(t)],
                       critical_now);
    }
    finalize_day(day, params);
    return day;
}

} // namespace

const char* policy_name(Policy policy) {
    switch (policy) {
        case Policy::AdaEM: return "adaem";
        case Policy::OnDemand: return "on-demand";
        case Policy::EnergyNeutral: return "energy-neutral";
        case Policy::Oracle: return "oracle";
    }
    return "unknown";
}

Policy parse_policy(std::string_view name) {
    if (name == "adaem") return Policy::AdaEM;
    if (name == "on-demand") return Policy::OnDemand;
    if (name == "energy-neutral") return Policy::EnergyNeutral;
    if (name == "oracle") return Policy::Oracle;
    throw ConfigError("unknown policy '" + std::string(name)
                      + "' (expected adaem, on-demand, energy-neutral, or oracle)");
}

DayResult run_day(Policy policy, const SimParams& params, const UserTraces& traces,
                  const TreeEnsemble* model, int day_index, PolicyState& state) {
    params.energy.validate();
    params.profile.validate();
    const int horizon = params.energy.horizon_intervals;
    if (day_index < 0) throw std::invalid_argument("run_day: day_index must be >= 0");
    const std::size_t needed = (static_cast<std::size_t>(day_index) + 1)
                               * static_cast<std::size_t>(horizon);
    if (traces.harvest.values_j.size() < needed) {
        throw std::invalid_argument("run_day: harvest trace shorter than the requested day");
    }
    if (traces.activities.labels.size() < needed) {
        throw std::invalid_argument("run_day: activity schedule shorter than the requested day");
    }
    state.battery.interval_index = 0;

    switch (policy) {
        case Policy::AdaEM: return run_adaem_day(params, traces, model, day_index, state);
        case Policy::Oracle: return run_oracle_day(params, traces, day_index, state);
        case Policy::OnDemand: return run_on_demand_day(params, traces, day_index, state);
        case Policy::EnergyNeutral:
            return run_energy_neutral_day(params, traces, day_index, state);
    }
    throw std::invalid_argument("run_day: unknown policy");
}

std::vector<double> robust_forecast(const TreeEnsemble& model, const HarvestTrace& history,
                                    const ActivitySchedule& schedule, int start_interval,
                                    int steps, double k_sigma) {
    if (steps < 0) throw std::invalid_argument("robust_forecast: steps must be >= 0");
    if (static_cast<std::size_t>(start_interval) != history.values_j.size()) {
        throw std::invalid_argument("robust_forecast: history must end at start_interval");
    }
    HarvestTrace working = history;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int s = 0; s < steps; ++s) {
        FeatureVector features = build_features(working, schedule, start_interval + s,
                                                model.layout);
        fill_missing_with_training_means(features, model);
        Forecast forecast = predict(model, features);
        out.push_back(worst_case(forecast, k_sigma));
        // The recursion extends history with the central estimate; the
        // robustified value is only what the planner consumes.
        working.values_j.push_back(forecast.mean_j);
    }
    return out;
}

void ExperimentSpec::validate() const {
    sim.energy.validate();
    sim.profile.validate();
    climate.validate();
    activity.validate();
    panel.validate();
    if (users < 1) throw ConfigError("users must be >= 1");
    if (training_days < 0) throw ConfigError("training_days must be >= 0");
    if (eval_days < 1) throw ConfigError("eval_days must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (policies.empty()) throw ConfigError("policies must not be empty");
    if (exercise_windows.empty()) throw ConfigError("exercise_windows must not be empty");
    if (motion_baseline_w < 0.0) throw ConfigError("motion_baseline_w must be >= 0");
    if (motion_harvesters < 0) throw ConfigError("motion_harvesters must be >= 0");
    if (sim.mask_fraction < 0.0 || sim.mask_fraction > 1.0) {
        throw ConfigError("mask_fraction must be in [0, 1]");
    }
    if (sim.k_sigma < 0.0) throw ConfigError("k_sigma must be >= 0");
}

std::vector<UserTraces> build_user_traces(const ExperimentSpec& spec) {
    spec.validate();
    const int total = spec.total_days();
    // One measurement site: every user lives under the same sky.
    IrradianceSeries sky = generate_irradiance(spec.seed, total, spec.climate);
    HarvestTrace pv_potential = pv_trace(sky, spec.panel);

    std::vector<UserTraces> users;
    users.reserve(static_cast<std::size_t>(spec.users));
    for (int u = 0; u < spec.users; ++u) {
        ActivityTemplate tmpl = spec.activity;
        tmpl.exercise_intervals =
            spec.exercise_windows[static_cast<std::size_t>(u) % spec.exercise_windows.size()];
        const std::uint64_t user_seed =
            derive_seed(spec.seed, kUserActivityStream + static_cast<std::uint64_t>(u));
        ActivitySchedule activities = generate_activity_schedule(user_seed, total, tmpl);

        HarvestTrace pv = pv_potential;
        if (spec.gate_pv_by_location) {
            for (std::size_t i = 0; i < pv.values_j.size(); ++i) {
                if (!activities.outdoor[i]) pv.values_j[i] = 0.0;
            }
        }
        HarvestTrace motion = motion_trace(activities, spec.motion_baseline_w,
                                           spec.motion_harvesters, spec.intensities);
        UserTraces traces;
        traces.harvest = combine_harvest(pv, motion);
        traces.activities = std::move(activities);
        users.push_back(std::move(traces));
    }
    return users;
}

TreeEnsemble train_on_leading_days(const ExperimentSpec& spec,
                                   const std::vector<UserTraces>& traces) {
    if (spec.training_days < 1) {
        throw ConfigError("training_days must be >= 1 to fit the forecaster");
    }
    TrainingSet pooled;
    const FeatureLayout layout;
    for (const UserTraces& user : traces) {
        HarvestTrace head;
        head.interval_seconds = user.harvest.interval_seconds;
        head.start_epoch_s = user.harvest.start_epoch_s;
        const std::size_t n = static_cast<std::size_t>(spec.training_days)
                              * static_cast<std::size_t>(user.activities.intervals_per_day);
        head.values_j.assign(user.harvest.values_j.begin(),
                             user.harvest.values_j.begin() + static_cast<std::ptrdiff_t>(n));
        TrainingSet rows =
            make_training_rows(head, schedule_prefix(user.activities, spec.training_days), layout);
        pooled.features.insert(pooled.features.end(), rows.features.begin(), rows.features.end());
        pooled.targets_j.insert(pooled.targets_j.end(), rows.targets_j.begin(),
                                rows.targets_j.end());
    }
    EnsembleParams params = spec.ensemble;
    params.seed = derive_seed(spec.seed, kModelStream);
    return fit(pooled, params, layout);
}

int month_of_day_of_year(int day_of_year) {
    static constexpr int kCumulative[12] = {31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334, 365};
    int doy = day_of_year % 365;
    if (doy < 0) doy += 365;
    for (int m = 0; m < 12; ++m) {
        if (doy < kCumulative[m]) return m + 1;
    }
    return 12;
}

std::uint64_t trace_fingerprint(const UserTraces& traces) {
    std::uint64_t h = fnv1a64(traces.harvest.values_j.data(),
                              traces.harvest.values_j.size() * sizeof(double));
    for (ActivityLabel label : traces.activities.labels) {
        const auto v = static_cast<unsigned char>(label);
        h = fnv1a64(&v, 1, h);
    }
    return h;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    return run_experiment_on(spec, build_user_traces(spec));
}

ExperimentResult run_experiment_on(const ExperimentSpec& spec, std::vector<UserTraces> traces,
                                   TreeEnsemble model) {
    spec.validate();
    if (static_cast<int>(traces.size()) != spec.users) {
        throw ConfigError("trace count (" + std::to_string(traces.size())
                          + ") does not match the configured users ("
                          + std::to_string(spec.users) + ")");
    }
    ExperimentResult result;
    result.spec = spec;
    result.traces = std::move(traces);
    result.model = std::move(model);

    bool needs_model = false;
    for (Policy p : spec.policies) {
        if (p == Policy::AdaEM && !spec.sim.ideal_predictions) needs_model = true;
    }
    if (needs_model && result.model.trees.empty()) {
        result.model = train_on_leading_days(spec, result.traces);
    }

    result.day_month.resize(static_cast<std::size_t>(spec.eval_days));
    for (int d = 0; d < spec.eval_days; ++d) {
        result.day_month[static_cast<std::size_t>(d)] =
            month_of_day_of_year(spec.climate.start_day_of_year + spec.training_days + d);
    }

    const double start_energy =
        spec.initial_battery_j < 0.0 ? spec.sim.energy.e_target_j : spec.initial_battery_j;

    result.runs.resize(spec.policies.size());
    for (std::size_t p = 0; p < spec.policies.size(); ++p) {
        result.runs[p].policy = spec.policies[p];
        result.runs[p].user_days.resize(static_cast<std::size_t>(spec.users));
    }

    // One task per (policy, user) pair: a user's days are sequential because
    // the battery carries over, but pairs are independent.
    struct Task {
        std::size_t policy_slot;
        int user;
    };
    std::vector<Task> tasks;
    for (std::size_t p = 0; p < spec.policies.size(); ++p) {
        for (int u = 0; u < spec.users; ++u) tasks.push_back({p, u});
    }

    auto run_task = [&](const Task& task) {
        const Policy policy = spec.policies[task.policy_slot];
        const UserTraces& traces = result.traces[static_cast<std::size_t>(task.user)];
        const TreeEnsemble* model =
            (policy == Policy::AdaEM && !spec.sim.ideal_predictions) ? &result.model : nullptr;
        PolicyState state;
        state.battery = BatteryState{start_energy, 0};
        std::vector<DayResult>& out =
            result.runs[task.policy_slot].user_days[static_cast<std::size_t>(task.user)];
        out.reserve(static_cast<std::size_t>(spec.eval_days));
        for (int d = 0; d < spec.eval_days; ++d) {
            out.push_back(run_day(policy, spec.sim, traces, model, spec.training_days + d, state));
        }
    };

    if (spec.jobs <= 1 || tasks.size() <= 1) {
        for (const Task& task : tasks) run_task(task);
    } else {
        std::atomic<std::size_t> next{0};
        const std::size_t workers =
            std::min(static_cast<std::size_t>(spec.jobs), tasks.size());
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= tasks.size()) break;
                    run_task(tasks[i]);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }

    for (std::size_t p = 0; p < spec.policies.size(); ++p) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const UserTraces& traces : result.traces) {
            const std::uint64_t f = trace_fingerprint(traces);
            h = fnv1a64(&f, sizeof f, h);
        }
        result.runs[p].trace_hash = h;
    }
    for (const PolicyRun& run : result.runs) {
        if (run.trace_hash != result.runs.front().trace_hash) {
            throw std::logic_error("policy runs consumed different traces");
        }
    }
    return result;
}

} // namespace adaem
