#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "adaem/baselines.hpp"
#include "adaem/core.hpp"
#include "adaem/harvest.hpp"
#include "adaem/planner.hpp"
#include "adaem/predictor.hpp"

namespace adaem {

// ---------------------------------------------------------------------------
// Policies under comparison. AdaEM is the receding-horizon optimizer; the
// other three are the reference strategies it is measured against.
// ---------------------------------------------------------------------------

enum class Policy { AdaEM, OnDemand, EnergyNeutral, Oracle };

const char* policy_name(Policy policy);
// Accepts the CLI spellings: adaem, on-demand, energy-neutral, oracle.
Policy parse_policy(std::string_view name);

struct SimParams {
    EnergyConfig energy;
    EnergyAccuracyProfile profile = default_accuracy_profile();
    double a_min = 0.90;
    // Forecast robustness: plan against mean - k_sigma * stddev, floored at 0.
    double k_sigma = 1.0;
    // Substitute the actual trace for forecasts (prediction-error ablation).
    bool ideal_predictions = false;
    std::set<ActivityLabel> critical_set = {ActivityLabel::Exercise};
    // Fraction of observed days an hour must be critical in to be masked.
    double mask_fraction = 0.5;
};

// One user's inputs: what the device actually harvests and what the wearer
// actually does, over the whole simulated period (training + evaluation).
struct UserTraces {
    HarvestTrace harvest;
    ActivitySchedule activities;
};

// State carried from one day to the next: the battery level and, for the
// on-demand policy, whether a charging session is in progress.
struct PolicyState {
    BatteryState battery;
    bool charging = false;
};

struct DayResult {
    // Realized battery levels, one per interval boundary: horizon + 1 values,
    // [0] is the start-of-day level.
    std::vector<double> battery_j;
    std::vector<bool> charge_flags;
    std::vector<double> consumption_j;
    std::vector<double> accuracy;
    double overflow_j = 0.0;
    // Energy the device asked for that the battery could not supply. Zero on
    // any day that stays above empty; tracked so bookkeeping always closes.
    double underflow_j = 0.0;
    ViolationReport report;
    double charging_energy_j = 0.0;
    int min_gap = 0;
    // False when any planning step that day fell back to a best-effort plan.
    bool planning_feasible = true;
    double harvest_j = 0.0;
    // Utilized harvest: efficiency-weighted intake minus capacity overflow.
    double savings_j = 0.0;
    double mean_accuracy = 0.0;
};

// Simulate one day of `policy` against the actual traces. AdaEM replans every
// interval from the realized battery level, with the current interval's
// observed harvest and activity replacing their predictions; the oracle plans
// once with the full day known; on-demand and energy-neutral apply their
// rules directly. The battery always steps on the ACTUAL harvest. `model` is
// only consulted by AdaEM and may be null when predictions are ideal.
// Throws std::invalid_argument when the traces do not cover the day.
DayResult run_day(Policy policy, const SimParams& params, const UserTraces& traces,
                  const TreeEnsemble* model, int day_index, PolicyState& state);

// Lower-bound forecasts for `steps` intervals starting at `start_interval`.
// Multi-step: each step's mean extends the history the next step sees, and
// the returned value is the robustified (mean - k_sigma * stddev) estimate.
std::vector<double> robust_forecast(const TreeEnsemble& model, const HarvestTrace& history,
                                    const ActivitySchedule& schedule, int start_interval,
                                    int steps, double k_sigma);

// ---------------------------------------------------------------------------
// Multi-user, multi-policy experiment driver.
// ---------------------------------------------------------------------------

// Evaluation runs a calendar year by default: the synthetic period starts in
// early November so the leading 60 training days end exactly on December 31.
inline ClimateConfig default_experiment_climate() {
    ClimateConfig climate;
    climate.start_day_of_year = 305;
    return climate;
}

struct ExperimentSpec {
    SimParams sim;
    ClimateConfig climate = default_experiment_climate();
    ActivityTemplate activity;
    PvPanelConfig panel;
    double motion_baseline_w = 13e-6;
    int motion_harvesters = 1;
    MotionIntensities intensities;
    // Length of the daily exercise block, cycled over users. The default
    // spans the window lengths studied for the critical-activity effect.
    std::vector<int> exercise_windows = {6, 5, 4, 3, 2};
    // The PV cell only sees the sky when the wearer is outdoors; indoor
    // intervals harvest motion only.
    bool gate_pv_by_location = true;
    int users = 5;
    int training_days = 60;
    int eval_days = 365;
    std::uint64_t seed = 1;
    EnsembleParams ensemble;
    std::vector<Policy> policies = {Policy::AdaEM, Policy::OnDemand, Policy::EnergyNeutral,
                                    Policy::Oracle};
    int jobs = 1;
    // Start-of-run battery level; negative means "start at the target".
    double initial_battery_j = -1.0;

    int total_days() const { return training_days + eval_days; }
    void validate() const;
};

struct PolicyRun {
    Policy policy;
    // [user][evaluation day]
    std::vector<std::vector<DayResult>> user_days;
    // Hash of the inputs this run consumed; equal across policies by design
    // and asserted by run_experiment.
    std::uint64_t trace_hash = 0;
};

struct ExperimentResult {
    ExperimentSpec spec;
    std::vector<UserTraces> traces;
    // Fitted forecaster; empty when predictions were ideal.
    TreeEnsemble model;
    std::vector<PolicyRun> runs;
    // Calendar month (1..12) of each evaluation day.
    std::vector<int> day_month;
};

// All users share one irradiance series (one site); activity schedules are
// per-user. Traces cover training + evaluation days.
std::vector<UserTraces> build_user_traces(const ExperimentSpec& spec);

// Pooled fit over every user's leading training days.
TreeEnsemble train_on_leading_days(const ExperimentSpec& spec,
                                   const std::vector<UserTraces>& traces);

// Generate traces, train the forecaster, then run every listed policy over
// the evaluation days with identical inputs. Deterministic given the seed,
// regardless of the job count.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Same, but over caller-supplied traces (one per user, covering training +
// evaluation days). An empty `model` is fitted on the leading training days
// when a policy needs one; a non-empty model is used as-is.
ExperimentResult run_experiment_on(const ExperimentSpec& spec, std::vector<UserTraces> traces,
                                   TreeEnsemble model = {});

// Month (1..12) for a day-of-year index in a fixed 365-day year.
int month_of_day_of_year(int day_of_year);

std::uint64_t trace_fingerprint(const UserTraces& traces);

} // namespace adaem
