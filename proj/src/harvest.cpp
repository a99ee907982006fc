#include "adaem/harvest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "adaem/csv.hpp"
#include "adaem/errors.hpp"
#include "adaem/rng.hpp"

namespace adaem {

namespace {

constexpr std::uint64_t kActivityStream = 0xac11;
constexpr std::uint64_t kIrradianceStream = 0x5018;

std::string line_context(const std::string& path, std::size_t line_no) {
    return path + " line " + std::to_string(line_no);
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

// Reads all non-empty lines; strips a header line when the first cell does
// not look like data. Keeps 1-based line numbers for error messages.
std::vector<std::pair<std::size_t, std::string>> read_data_lines(const std::string& path,
                                                                 bool first_cell_is_timestamp) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::vector<std::pair<std::size_t, std::string>> lines;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        lines.emplace_back(line_no, line);
    }
    if (!lines.empty()) {
        const auto first_cell = trim(split_csv_line(lines.front().second).front());
        bool is_data = false;
        try {
            if (first_cell_is_timestamp) {
                parse_timestamp(first_cell, "probe");
            } else {
                parse_int(first_cell, "probe");
            }
            is_data = true;
        } catch (const ParseError&) {
        }
        if (!is_data) lines.erase(lines.begin());
    }
    if (lines.empty()) {
        throw ParseError(path + ": no data rows");
    }
    return lines;
}

} // namespace

void PvPanelConfig::validate() const {
    if (area_m2 <= 0.0) throw ConfigError("pv area_m2 must be positive");
    if (!(efficiency > 0.0 && efficiency <= 1.0)) {
        throw ConfigError("pv efficiency must be in (0, 1]");
    }
}

double motion_intensity(ActivityLabel label, const MotionIntensities& intensities) {
    switch (label) {
        case ActivityLabel::Sleep: return intensities.sleep;
        case ActivityLabel::Work: return intensities.work;
        case ActivityLabel::Exercise: return intensities.exercise;
        case ActivityLabel::Leisure: return intensities.leisure;
        case ActivityLabel::Other: return intensities.other;
    }
    return 0.0;
}

double pv_energy(double irradiance_w_m2, const PvPanelConfig& panel, double interval_seconds) {
    if (irradiance_w_m2 < 0.0) {
        throw std::invalid_argument("pv_energy: irradiance must be non-negative");
    }
    return irradiance_w_m2 * panel.area_m2 * panel.efficiency * interval_seconds;
}

double motion_energy(ActivityLabel label, double interval_seconds, double baseline_w,
                     const MotionIntensities& intensities) {
    if (baseline_w < 0.0) {
        throw std::invalid_argument("motion_energy: baseline power must be non-negative");
    }
    return motion_intensity(label, intensities) * baseline_w * interval_seconds;
}

HarvestTrace pv_trace(const IrradianceSeries& irradiance, const PvPanelConfig& panel) {
    HarvestTrace trace;
    trace.interval_seconds = irradiance.interval_seconds;
    trace.start_epoch_s = irradiance.start_epoch_s;
    trace.values_j.reserve(irradiance.values_w_m2.size());
    for (double ghi : irradiance.values_w_m2) {
        trace.values_j.push_back(pv_energy(ghi, panel, irradiance.interval_seconds));
    }
    return trace;
}

HarvestTrace motion_trace(const ActivitySchedule& schedule, double baseline_w, int harvesters,
                          const MotionIntensities& intensities) {
    if (harvesters < 0) {
        throw std::invalid_argument("motion_trace: harvester count must be non-negative");
    }
    HarvestTrace trace;
    trace.interval_seconds = schedule.interval_seconds;
    trace.start_epoch_s = schedule.start_epoch_s;
    trace.values_j.reserve(schedule.labels.size());
    for (ActivityLabel label : schedule.labels) {
        trace.values_j.push_back(harvesters
                                 * motion_energy(label, schedule.interval_seconds, baseline_w,
                                                 intensities));
    }
    return trace;
}

HarvestTrace combine_harvest(const HarvestTrace& pv, const HarvestTrace& motion) {
    if (pv.values_j.size() != motion.values_j.size()) {
        throw std::invalid_argument("combine_harvest: trace lengths differ");
    }
    if (pv.interval_seconds != motion.interval_seconds) {
        throw std::invalid_argument("combine_harvest: interval durations differ");
    }
    HarvestTrace combined = pv;
    for (std::size_t i = 0; i < combined.values_j.size(); ++i) {
        combined.values_j[i] += motion.values_j[i];
    }
    return combined;
}

// ---------------------------------------------------------------------------
// Synthetic activity schedule
// ---------------------------------------------------------------------------

void ActivityTemplate::validate() const {
    if (exercise_intervals < 1) throw ConfigError("exercise block must be at least 1 interval");
    if (work_intervals < 0) throw ConfigError("work block length must be non-negative");
    if (!(0 <= wake_hour_min && wake_hour_min <= wake_hour_max && wake_hour_max < 12)) {
        throw ConfigError("wake hours must satisfy 0 <= min <= max < 12");
    }
    if (!(12 < bed_hour_min && bed_hour_min <= bed_hour_max && bed_hour_max <= 23)) {
        throw ConfigError("bed hours must satisfy 12 < min <= max <= 23");
    }
    const int sleep_max = (24 - bed_hour_min) + wake_hour_max;
    if (sleep_max + work_intervals + exercise_intervals > 24) {
        throw ConfigError("daily activity blocks exceed 24 intervals");
    }
    if (bed_hour_min - exercise_intervals < wake_hour_max) {
        throw ConfigError("exercise block does not fit in the waking window");
    }
    if (outdoor_leisure_prob < 0.0 || outdoor_leisure_prob > 1.0) {
        throw ConfigError("outdoor_leisure_prob must be in [0, 1]");
    }
}

ActivitySchedule generate_activity_schedule(std::uint64_t seed, int days,
                                            const ActivityTemplate& tmpl) {
    if (days < 1) throw std::invalid_argument("generate_activity_schedule: days must be >= 1");
    tmpl.validate();

    std::mt19937_64 rng = make_rng(seed, kActivityStream);
    std::uniform_int_distribution<int> wake_dist(tmpl.wake_hour_min, tmpl.wake_hour_max);
    std::uniform_int_distribution<int> bed_dist(tmpl.bed_hour_min, tmpl.bed_hour_max);
    std::uniform_int_distribution<int> work_start_dist(8, 10);
    std::uniform_int_distribution<int> run_len_dist(1, 3);
    std::bernoulli_distribution leisure_dist(0.5);
    std::bernoulli_distribution outdoor_dist(tmpl.outdoor_leisure_prob);

    ActivitySchedule schedule;
    schedule.intervals_per_day = 24;
    schedule.labels.resize(static_cast<std::size_t>(days) * 24, ActivityLabel::Other);
    schedule.outdoor.assign(schedule.labels.size(), false);
    schedule.weekend.resize(static_cast<std::size_t>(days));

    for (int d = 0; d < days; ++d) {
        // Day 0 is a Monday by convention; callers align start dates to that.
        const bool weekend = d % 7 >= 5;
        schedule.weekend[static_cast<std::size_t>(d)] = weekend;
        const std::size_t base = static_cast<std::size_t>(d) * 24;

        const int wake = wake_dist(rng);
        const int bed = bed_dist(rng);
        std::vector<bool> assigned(24, false);
        auto put = [&](int from, int to, ActivityLabel label) {
            for (int h = from; h < to; ++h) {
                schedule.labels[base + static_cast<std::size_t>(h)] = label;
                assigned[static_cast<std::size_t>(h)] = true;
            }
        };

        put(0, wake, ActivityLabel::Sleep);
        put(bed, 24, ActivityLabel::Sleep);

        if (!weekend && tmpl.work_intervals > 0) {
            int ws = work_start_dist(rng);
            ws = std::clamp(ws, wake, bed - tmpl.work_intervals);
            put(ws, ws + tmpl.work_intervals, ActivityLabel::Work);
        }

        // The exercise block is the user's fixed evening slot: it ends right
        // before the earliest bedtime, so long blocks run up against the
        // night. A stable slot is also what makes the hour-of-day criticality
        // mask a reliable signal.
        int ex = tmpl.bed_hour_min - tmpl.exercise_intervals;
        ex = std::max(ex, wake);
        put(ex, ex + tmpl.exercise_intervals, ActivityLabel::Exercise);

        for (int h = wake; h < bed;) {
            if (assigned[static_cast<std::size_t>(h)]) {
                ++h;
                continue;
            }
            const ActivityLabel filler =
                leisure_dist(rng) ? ActivityLabel::Leisure : ActivityLabel::Other;
            int run = run_len_dist(rng);
            while (run-- > 0 && h < bed && !assigned[static_cast<std::size_t>(h)]) {
                schedule.labels[base + static_cast<std::size_t>(h)] = filler;
                assigned[static_cast<std::size_t>(h)] = true;
                ++h;
            }
        }

        for (int h = 0; h < 24; ++h) {
            const ActivityLabel label = schedule.labels[base + static_cast<std::size_t>(h)];
            if (label == ActivityLabel::Exercise) {
                schedule.outdoor[base + static_cast<std::size_t>(h)] = true;
            } else if (label == ActivityLabel::Leisure && h >= 8 && h < 20) {
                schedule.outdoor[base + static_cast<std::size_t>(h)] = outdoor_dist(rng);
            }
        }
    }
    return schedule;
}

// ---------------------------------------------------------------------------
// Synthetic irradiance
// ---------------------------------------------------------------------------

void ClimateConfig::validate() const {
    if (base_peak_w_m2 < 0.0) throw ConfigError("base_peak_w_m2 must be non-negative");
    if (seasonal_amplitude < 0.0 || seasonal_amplitude >= 1.0) {
        throw ConfigError("seasonal_amplitude must be in [0, 1)");
    }
    if (daylight_mean_h - daylight_amplitude_h <= 0.0
        || daylight_mean_h + daylight_amplitude_h >= 24.0) {
        throw ConfigError("daylight hours must stay within (0, 24)");
    }
    if (!(0.0 <= cloud_min && cloud_min <= cloud_max)) {
        throw ConfigError("cloudiness range must satisfy 0 <= min <= max");
    }
    if (start_day_of_year < 0 || start_day_of_year > 364) {
        throw ConfigError("start_day_of_year must be in [0, 364]");
    }
}

IrradianceSeries generate_irradiance(std::uint64_t seed, int days, const ClimateConfig& climate) {
    if (days < 1) throw std::invalid_argument("generate_irradiance: days must be >= 1");
    climate.validate();

    std::mt19937_64 rng = make_rng(seed, kIrradianceStream);
    std::uniform_real_distribution<double> cloud_dist(climate.cloud_min, climate.cloud_max);
    constexpr double two_pi = 2.0 * std::numbers::pi;

    IrradianceSeries series;
    series.interval_seconds = 3600.0;
    series.values_w_m2.reserve(static_cast<std::size_t>(days) * 24);

    for (int d = 0; d < days; ++d) {
        const int doy = (climate.start_day_of_year + d) % 365;
        const double season = 1.0 - climate.seasonal_amplitude * std::cos(two_pi * doy / 365.0);
        const double daylight =
            climate.daylight_mean_h + climate.daylight_amplitude_h * std::sin(two_pi * (doy - 80) / 365.0);
        const double cloud = cloud_dist(rng);
        const double peak = climate.base_peak_w_m2 * season * cloud;
        const double sunrise = 12.0 - daylight / 2.0;
        const double sunset = 12.0 + daylight / 2.0;

        for (int h = 0; h < 24; ++h) {
            const double mid = h + 0.5;
            double value = 0.0;
            if (mid > sunrise && mid < sunset) {
                const double phase = std::numbers::pi * (mid - sunrise) / daylight;
                const double s = std::sin(phase);
                value = peak * s * s;
            }
            series.values_w_m2.push_back(value);
        }
    }
    return series;
}

// ---------------------------------------------------------------------------
// CSV interchange
// ---------------------------------------------------------------------------

IrradianceSeries load_irradiance_csv(const std::string& path, double interval_seconds) {
    if (interval_seconds <= 0.0) {
        throw std::invalid_argument("load_irradiance_csv: interval_seconds must be positive");
    }
    const auto lines = read_data_lines(path, true);
    const auto ivl = static_cast<std::int64_t>(interval_seconds);

    std::vector<double> sums;
    std::vector<int> counts;
    std::int64_t start = 0;
    std::int64_t prev_ts = 0;
    bool first = true;

    for (const auto& [line_no, raw] : lines) {
        const std::string ctx = line_context(path, line_no);
        const auto cells = split_csv_line(raw);
        if (cells.size() != 2) {
            throw ParseError(ctx + ": expected 2 columns, got " + std::to_string(cells.size()));
        }
        const std::int64_t ts = parse_timestamp(cells[0], ctx);
        const double value = parse_double(cells[1], ctx);
        if (value < 0.0) {
            throw ParseError(ctx + ": negative irradiance " + fmt_double(value));
        }
        if (first) {
            start = ts;
            first = false;
        } else if (ts <= prev_ts) {
            throw ParseError(ctx + ": timestamps must be strictly ascending");
        }
        prev_ts = ts;

        const auto bucket = static_cast<std::size_t>((ts - start) / ivl);
        if (bucket >= sums.size()) {
            sums.resize(bucket + 1, 0.0);
            counts.resize(bucket + 1, 0);
        }
        sums[bucket] += value;
        counts[bucket] += 1;
    }

    IrradianceSeries series;
    series.interval_seconds = interval_seconds;
    series.start_epoch_s = start;
    series.values_w_m2.resize(sums.size());
    for (std::size_t i = 0; i < sums.size(); ++i) {
        if (counts[i] == 0) {
            throw ParseError(path + ": no samples for interval " + std::to_string(i));
        }
        series.values_w_m2[i] = sums[i] / counts[i];
    }
    return series;
}

void write_irradiance_csv(const std::string& path, const IrradianceSeries& series) {
    std::ofstream out = open_for_write(path);
    out << "timestamp,ghi_w_m2\n";
    const auto ivl = static_cast<std::int64_t>(series.interval_seconds);
    for (std::size_t i = 0; i < series.values_w_m2.size(); ++i) {
        out << format_timestamp(series.start_epoch_s + static_cast<std::int64_t>(i) * ivl) << ','
            << fmt_double(series.values_w_m2[i]) << '\n';
    }
}

ActivitySchedule load_activity_csv(const std::string& path, double interval_seconds) {
    if (interval_seconds <= 0.0 || std::fmod(86400.0, interval_seconds) != 0.0) {
        throw std::invalid_argument("load_activity_csv: interval_seconds must divide a day");
    }
    const int per_day = static_cast<int>(86400.0 / interval_seconds);
    const auto lines = read_data_lines(path, true);
    const auto ivl = static_cast<std::int64_t>(interval_seconds);

    ActivitySchedule schedule;
    schedule.interval_seconds = interval_seconds;
    schedule.intervals_per_day = per_day;

    std::int64_t expected_ts = 0;
    std::size_t row = 0;
    for (const auto& [line_no, raw] : lines) {
        const std::string ctx = line_context(path, line_no);
        const auto cells = split_csv_line(raw);
        if (cells.size() != 4) {
            throw ParseError(ctx + ": expected 4 columns, got " + std::to_string(cells.size()));
        }
        const std::int64_t ts = parse_timestamp(cells[0], ctx);
        if (row == 0) {
            schedule.start_epoch_s = ts;
            expected_ts = ts;
        } else if (ts != expected_ts) {
            throw ParseError(ctx + ": timestamps must advance by exactly "
                             + std::to_string(ivl) + " s");
        }
        expected_ts = ts + ivl;

        schedule.labels.push_back(parse_activity(trim(cells[1]), ctx));
        const std::string location = to_lower(trim(cells[2]));
        if (location == "outdoor") {
            schedule.outdoor.push_back(true);
        } else if (location == "indoor") {
            schedule.outdoor.push_back(false);
        } else {
            throw ParseError(ctx + ": unknown location '" + location + "'");
        }
        const std::string daytype = to_lower(trim(cells[3]));
        if (daytype != "weekday" && daytype != "weekend") {
            throw ParseError(ctx + ": unknown daytype '" + daytype + "'");
        }
        const bool weekend = daytype == "weekend";
        const std::size_t day = row / static_cast<std::size_t>(per_day);
        if (day == schedule.weekend.size()) {
            schedule.weekend.push_back(weekend);
        } else if (schedule.weekend[day] != weekend) {
            throw ParseError(ctx + ": daytype changes within one day");
        }
        ++row;
    }
    if (schedule.labels.size() % static_cast<std::size_t>(per_day) != 0) {
        throw ParseError(path + ": row count is not a whole number of days");
    }
    return schedule;
}

void write_activity_csv(const std::string& path, const ActivitySchedule& schedule) {
    std::ofstream out = open_for_write(path);
    out << "timestamp,activity,location,daytype\n";
    const auto ivl = static_cast<std::int64_t>(schedule.interval_seconds);
    for (std::size_t i = 0; i < schedule.labels.size(); ++i) {
        const std::size_t day = i / static_cast<std::size_t>(schedule.intervals_per_day);
        out << format_timestamp(schedule.start_epoch_s + static_cast<std::int64_t>(i) * ivl) << ','
            << to_lower(activity_name(schedule.labels[i])) << ','
            << (schedule.outdoor[i] ? "outdoor" : "indoor") << ','
            << (schedule.weekend[day] ? "weekend" : "weekday") << '\n';
    }
}

HarvestTrace load_harvest_csv(const std::string& path, double interval_seconds) {
    const auto lines = read_data_lines(path, false);
    HarvestTrace trace;
    trace.interval_seconds = interval_seconds;
    long long expected_index = 0;
    for (const auto& [line_no, raw] : lines) {
        const std::string ctx = line_context(path, line_no);
        const auto cells = split_csv_line(raw);
        if (cells.size() != 2) {
            throw ParseError(ctx + ": expected 2 columns, got " + std::to_string(cells.size()));
        }
        const long long index = parse_int(cells[0], ctx);
        if (index != expected_index) {
            throw ParseError(ctx + ": expected interval_index " + std::to_string(expected_index));
        }
        const double value = parse_double(cells[1], ctx);
        if (value < 0.0) {
            throw ParseError(ctx + ": negative harvest " + fmt_double(value));
        }
        trace.values_j.push_back(value);
        ++expected_index;
    }
    return trace;
}

void write_harvest_csv(const std::string& path, const HarvestTrace& trace) {
    std::ofstream out = open_for_write(path);
    out << "interval_index,harvest_j\n";
    for (std::size_t i = 0; i < trace.values_j.size(); ++i) {
        out << i << ',' << fmt_double(trace.values_j[i]) << '\n';
    }
}

} // namespace adaem
