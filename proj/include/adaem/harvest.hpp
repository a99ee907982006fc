#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adaem/core.hpp"

namespace adaem {

// ---------------------------------------------------------------------------
// Energy sources: a small PV cell driven by ambient irradiance and a piezo
// harvester driven by body motion. Traces are per-interval energies in J.
// ---------------------------------------------------------------------------

struct PvPanelConfig {
    double area_m2 = 0.001;
    double efficiency = 0.10;

    void validate() const;
};

struct HarvestTrace {
    std::vector<double> values_j;
    double interval_seconds = 3600.0;
    std::int64_t start_epoch_s = 0;
};

struct IrradianceSeries {
    std::vector<double> values_w_m2;
    double interval_seconds = 3600.0;
    std::int64_t start_epoch_s = 0;
};

struct ActivitySchedule {
    std::vector<ActivityLabel> labels; // one per interval
    std::vector<bool> outdoor;         // one per interval
    std::vector<bool> weekend;         // one per day
    int intervals_per_day = 24;
    double interval_seconds = 3600.0;
    std::int64_t start_epoch_s = 0;

    int days() const { return static_cast<int>(weekend.size()); }
};

// Motion intensity per activity. Exercise/Other/Sleep follow the usual
// full/half/none convention; Work and Leisure sit in between and can be tuned.
struct MotionIntensities {
    double sleep = 0.0;
    double work = 0.3;
    double exercise = 1.0;
    double leisure = 0.2;
    double other = 0.5;
};

double motion_intensity(ActivityLabel label, const MotionIntensities& intensities);

// ---------------------------------------------------------------------------
// Source models
// ---------------------------------------------------------------------------

// Linear PV model: harvested energy = irradiance x area x efficiency x time.
// The cell's I-V curve is folded into the single efficiency factor.
double pv_energy(double irradiance_w_m2, const PvPanelConfig& panel, double interval_seconds);

double motion_energy(ActivityLabel label, double interval_seconds, double baseline_w,
                     const MotionIntensities& intensities = {});

HarvestTrace pv_trace(const IrradianceSeries& irradiance, const PvPanelConfig& panel);
HarvestTrace motion_trace(const ActivitySchedule& schedule, double baseline_w, int harvesters = 1,
                          const MotionIntensities& intensities = {});
HarvestTrace combine_harvest(const HarvestTrace& pv, const HarvestTrace& motion);

// ---------------------------------------------------------------------------
// Synthetic generators. Both are pure functions of (seed, days, parameters).
// ---------------------------------------------------------------------------

struct ActivityTemplate {
    int exercise_intervals = 3;
    int work_intervals = 8;
    int wake_hour_min = 6;
    int wake_hour_max = 7;
    int bed_hour_min = 22;
    int bed_hour_max = 23;
    double outdoor_leisure_prob = 0.4;

    void validate() const;
};

ActivitySchedule generate_activity_schedule(std::uint64_t seed, int days,
                                            const ActivityTemplate& tmpl);

struct ClimateConfig {
    double base_peak_w_m2 = 50.0;      // clear-sky noon peak at the equinox
    double seasonal_amplitude = 0.45;  // summer/winter swing of the peak
    double daylight_mean_h = 12.0;
    double daylight_amplitude_h = 3.0;
    double cloud_min = 0.3; // per-day multiplicative cloudiness range
    double cloud_max = 1.0;
    int start_day_of_year = 0;

    void validate() const;
};

IrradianceSeries generate_irradiance(std::uint64_t seed, int days, const ClimateConfig& climate);

// ---------------------------------------------------------------------------
// CSV interchange
// ---------------------------------------------------------------------------

IrradianceSeries load_irradiance_csv(const std::string& path, double interval_seconds);
void write_irradiance_csv(const std::string& path, const IrradianceSeries& series);

ActivitySchedule load_activity_csv(const std::string& path, double interval_seconds);
void write_activity_csv(const std::string& path, const ActivitySchedule& schedule);

HarvestTrace load_harvest_csv(const std::string& path, double interval_seconds);
void write_harvest_csv(const std::string& path, const HarvestTrace& trace);

} // namespace adaem
