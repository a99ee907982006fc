#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace adaem {

// Comparison slack for feasibility checks. Battery levels are sums of a few
// dozen doubles, so anything closer to a bound than this is treated as on it.
inline constexpr double kFeasEps = 1e-9;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct EnergyConfig {
    double capacity_j = 160.0;
    double e_min_j = 16.0;
    double e_max_j = 160.0;
    double e_target_j = 96.0;
    double e_charge_per_interval_j = 30.0;
    double harvest_efficiency = 1.0;
    int horizon_intervals = 24;
    double interval_seconds = 3600.0;

    // Throws ConfigError when the thresholds are inconsistent.
    void validate() const;
};

struct BatteryState {
    double energy_j = 0.0;
    int interval_index = 0;
};

enum class ActivityLabel : std::uint8_t { Sleep, Work, Exercise, Leisure, Other };
inline constexpr int kActivityCount = 5;

std::string_view activity_name(ActivityLabel label);
ActivityLabel parse_activity(std::string_view name, const std::string& context);

// Piecewise-linear map from per-interval consumption to task accuracy.
// Breakpoints must be strictly increasing in consumption and non-decreasing
// in accuracy; outside the breakpoint span the curve is flat.
struct EnergyAccuracyProfile {
    std::vector<std::pair<double, double>> points; // (consumption_j, accuracy)

    void validate() const;
};

EnergyAccuracyProfile default_accuracy_profile();

// A charging/consumption schedule over the remaining horizon, plus the
// battery trajectory it projects. projected_battery_j[t] is the level after
// interval t has elapsed.
struct Plan {
    std::vector<bool> charge_flags;
    std::vector<double> consumption_j;
    std::vector<double> projected_battery_j;
    int first_interval_index = 0;
};

struct ViolationReport {
    int energy_floor_violations = 0;
    int accuracy_violations = 0;
    int critical_charging_violations = 0;
    bool terminal_violation = false;

    int total_interval_violations() const {
        return energy_floor_violations + accuracy_violations + critical_charging_violations;
    }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

struct BatteryStepResult {
    BatteryState next;
    double overflow_j = 0.0;
};

// One interval of battery dynamics: add harvested and charged energy, subtract
// consumption, clamp to the physical range. Harvest beyond e_max_j is reported
// as overflow so callers can count wasted energy. An underflow clamps to zero
// here; detecting it is the constraint checker's job.
BatteryStepResult battery_step(const BatteryState& state, const EnergyConfig& config,
                               double harvest_j, bool charging, double consumption_j);

double accuracy_of(const EnergyAccuracyProfile& profile, double consumption_j);

// Smallest consumption on the profile that reaches accuracy a_min. Values at
// or below the first breakpoint's accuracy map to the first breakpoint.
double min_consumption_for(const EnergyAccuracyProfile& profile, double a_min);

// Minimum spacing between charging-session start times, where a session is a
// maximal run of consecutive true flags. With fewer than two sessions there
// is no spacing to worry about, so the full horizon length is returned.
int min_intercharge_gap(const std::vector<bool>& charge_flags);

std::vector<int> charging_session_starts(const std::vector<bool>& charge_flags);

ViolationReport check_constraints(const Plan& plan, const std::vector<ActivityLabel>& activities,
                                  const EnergyAccuracyProfile& profile, double a_min,
                                  const std::set<ActivityLabel>& critical_set,
                                  const EnergyConfig& config);

} // namespace adaem
