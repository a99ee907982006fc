#include "adaem/core.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "adaem/errors.hpp"

namespace adaem {

void EnergyConfig::validate() const {
    if (!(0.0 <= e_min_j && e_min_j < e_target_j && e_target_j <= e_max_j && e_max_j <= capacity_j)) {
        throw ConfigError("energy thresholds must satisfy 0 <= e_min < e_target <= e_max <= capacity");
    }
    if (e_charge_per_interval_j <= 0.0) {
        throw ConfigError("e_charge_per_interval_j must be positive");
    }
    if (!(harvest_efficiency > 0.0 && harvest_efficiency <= 1.0)) {
        throw ConfigError("harvest_efficiency must be in (0, 1]");
    }
    if (horizon_intervals < 1) {
        throw ConfigError("horizon_intervals must be at least 1");
    }
    if (interval_seconds <= 0.0) {
        throw ConfigError("interval_seconds must be positive");
    }
}

namespace {
constexpr std::array<std::string_view, kActivityCount> kActivityNames = {
    "Sleep", "Work", "Exercise", "Leisure", "Other"};
} // namespace

std::string_view activity_name(ActivityLabel label) {
    return kActivityNames[static_cast<std::size_t>(label)];
}

ActivityLabel parse_activity(std::string_view name, const std::string& context) {
    // Data files carry lowercase labels, config files may capitalize; accept both.
    auto matches = [](std::string_view a, std::string_view b) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (std::tolower(static_cast<unsigned char>(a[i]))
                != std::tolower(static_cast<unsigned char>(b[i]))) return false;
        }
        return true;
    };
    for (int i = 0; i < kActivityCount; ++i) {
        if (matches(name, kActivityNames[static_cast<std::size_t>(i)])) {
            return static_cast<ActivityLabel>(i);
        }
    }
    throw ParseError(context + ": unknown activity label '" + std::string(name) + "'");
}

void EnergyAccuracyProfile::validate() const {
    if (points.empty()) {
        throw ConfigError("accuracy profile must have at least one breakpoint");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& [consumption, accuracy] = points[i];
        if (accuracy < 0.0 || accuracy > 1.0) {
            throw ConfigError("accuracy profile values must lie in [0, 1]");
        }
        if (consumption < 0.0) {
            throw ConfigError("accuracy profile consumptions must be non-negative");
        }
        if (i > 0) {
            if (consumption <= points[i - 1].first) {
                throw ConfigError("accuracy profile consumptions must be strictly increasing");
            }
            if (accuracy < points[i - 1].second) {
                throw ConfigError("accuracy profile must be non-decreasing in consumption");
            }
        }
    }
}

EnergyAccuracyProfile default_accuracy_profile() {
    return EnergyAccuracyProfile{{{1.0, 0.80}, {2.0, 0.85}, {3.0, 0.90}, {4.0, 0.95}}};
}

BatteryStepResult battery_step(const BatteryState& state, const EnergyConfig& config,
                               double harvest_j, bool charging, double consumption_j) {
    if (harvest_j < 0.0) {
        throw std::invalid_argument("battery_step: harvest_j must be non-negative");
    }
    if (consumption_j < 0.0) {
        throw std::invalid_argument("battery_step: consumption_j must be non-negative");
    }
    const double raw = state.energy_j + config.harvest_efficiency * harvest_j
                       + (charging ? config.e_charge_per_interval_j : 0.0) - consumption_j;
    BatteryStepResult result;
    result.next.energy_j = std::clamp(raw, 0.0, config.e_max_j);
    result.next.interval_index = state.interval_index + 1;
    result.overflow_j = std::max(0.0, raw - config.e_max_j);
    return result;
}

double accuracy_of(const EnergyAccuracyProfile& profile, double consumption_j) {
    if (consumption_j < 0.0) {
        throw std::invalid_argument("accuracy_of: consumption_j must be non-negative");
    }
    const auto& pts = profile.points;
    if (pts.empty()) {
        throw ConfigError("accuracy_of: empty accuracy profile");
    }
    if (consumption_j <= pts.front().first) return pts.front().second;
    if (consumption_j >= pts.back().first) return pts.back().second;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (consumption_j <= pts[i].first) {
            const auto& [c0, a0] = pts[i - 1];
            const auto& [c1, a1] = pts[i];
            const double frac = (consumption_j - c0) / (c1 - c0);
            return a0 + frac * (a1 - a0);
        }
    }
    return pts.back().second; // unreachable, loop always finds a segment
}

double min_consumption_for(const EnergyAccuracyProfile& profile, double a_min) {
    const auto& pts = profile.points;
    if (pts.empty()) {
        throw ConfigError("min_consumption_for: empty accuracy profile");
    }
    if (a_min > pts.back().second + kFeasEps) {
        throw InfeasibleError("min_consumption_for: required accuracy exceeds the profile maximum");
    }
    if (a_min <= pts.front().second) return pts.front().first;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const auto& [c0, a0] = pts[i - 1];
        const auto& [c1, a1] = pts[i];
        if (a_min <= a1) {
            // Flat segments cannot contain a_min here since a_min > a0.
            if (a1 == a0) continue;
            return c0 + (a_min - a0) / (a1 - a0) * (c1 - c0);
        }
    }
    return pts.back().first; // a_min within kFeasEps of the maximum
}

std::vector<int> charging_session_starts(const std::vector<bool>& charge_flags) {
    std::vector<int> starts;
    for (std::size_t i = 0; i < charge_flags.size(); ++i) {
        if (charge_flags[i] && (i == 0 || !charge_flags[i - 1])) {
            starts.push_back(static_cast<int>(i));
        }
    }
    return starts;
}

int min_intercharge_gap(const std::vector<bool>& charge_flags) {
    const std::vector<int> starts = charging_session_starts(charge_flags);
    if (starts.size() <= 1) return static_cast<int>(charge_flags.size());
    int min_gap = static_cast<int>(charge_flags.size());
    for (std::size_t i = 1; i < starts.size(); ++i) {
        min_gap = std::min(min_gap, starts[i] - starts[i - 1]);
    }
    return min_gap;
}

ViolationReport check_constraints(const Plan& plan, const std::vector<ActivityLabel>& activities,
                                  const EnergyAccuracyProfile& profile, double a_min,
                                  const std::set<ActivityLabel>& critical_set,
                                  const EnergyConfig& config) {
    ViolationReport report;
    const std::size_t n = plan.charge_flags.size();
    if (n == 0) return report;
    for (std::size_t t = 0; t < n; ++t) {
        if (plan.projected_battery_j[t] < config.e_min_j - kFeasEps) {
            ++report.energy_floor_violations;
        }
        if (accuracy_of(profile, plan.consumption_j[t]) < a_min - kFeasEps) {
            ++report.accuracy_violations;
        }
        if (plan.charge_flags[t] && t < activities.size() && critical_set.count(activities[t]) > 0) {
            ++report.critical_charging_violations;
        }
    }
    report.terminal_violation = plan.projected_battery_j.back() < config.e_target_j - kFeasEps;
    return report;
}

} // namespace adaem
