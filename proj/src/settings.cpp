#include "adaem/settings.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "adaem/csv.hpp"
#include "adaem/errors.hpp"

namespace adaem {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string upper(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

double to_double(std::string_view v, const std::string& ctx) {
    std::string s(trim(v));
    char* end = nullptr;
    double x = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw ConfigError(ctx + ": expected a number, got '" + s + "'");
    }
    return x;
}

long long to_ll(std::string_view v, const std::string& ctx) {
    std::string_view s = trim(v);
    long long x = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw ConfigError(ctx + ": expected an integer, got '" + std::string(s) + "'");
    }
    return x;
}

int to_int(std::string_view v, const std::string& ctx) {
    long long x = to_ll(v, ctx);
    if (x < -(1ll << 31) || x > (1ll << 31) - 1) {
        throw ConfigError(ctx + ": integer out of range: '" + std::string(trim(v)) + "'");
    }
    return static_cast<int>(x);
}

std::uint64_t to_u64(std::string_view v, const std::string& ctx) {
    std::string_view s = trim(v);
    std::uint64_t x = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw ConfigError(ctx + ": expected a non-negative integer, got '" + std::string(s) + "'");
    }
    return x;
}

bool to_bool(std::string_view v, const std::string& ctx) {
    std::string s = lower(trim(v));
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(ctx + ": expected true or false, got '" + s + "'");
}

std::vector<std::string_view> split_list(std::string_view v) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        std::size_t comma = v.find(',', start);
        if (comma == std::string_view::npos) comma = v.size();
        std::string_view tok = trim(v.substr(start, comma - start));
        if (!tok.empty()) out.push_back(tok);
        start = comma + 1;
    }
    return out;
}

std::vector<int> to_int_list(std::string_view v, const std::string& ctx) {
    std::vector<int> out;
    for (std::string_view tok : split_list(v)) out.push_back(to_int(tok, ctx));
    return out;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ",";
        out += parts[i];
    }
    return out;
}

// Breakpoint list: "1:0.8,2:0.85,..." mapping consumption (J) to accuracy.
std::vector<std::pair<double, double>> to_profile(std::string_view v, const std::string& ctx) {
    std::vector<std::pair<double, double>> points;
    for (std::string_view tok : split_list(v)) {
        std::size_t colon = tok.find(':');
        if (colon == std::string_view::npos) {
            throw ConfigError(ctx + ": expected consumption:accuracy pairs, got '"
                              + std::string(tok) + "'");
        }
        points.emplace_back(to_double(tok.substr(0, colon), ctx),
                            to_double(tok.substr(colon + 1), ctx));
    }
    return points;
}

std::set<ActivityLabel> to_activity_set(std::string_view v, const std::string& ctx) {
    std::set<ActivityLabel> out;
    for (std::string_view tok : split_list(v)) {
        try {
            out.insert(parse_activity(tok, ctx));
        } catch (const ParseError& e) {
            throw ConfigError(e.what());
        }
    }
    return out;
}

std::vector<Policy> to_policy_list(std::string_view v, const std::string& ctx) {
    std::vector<Policy> out;
    for (std::string_view tok : split_list(v)) {
        try {
            out.push_back(parse_policy(tok));
        } catch (const ConfigError& e) {
            throw ConfigError(ctx + ": " + e.what());
        }
    }
    return out;
}

struct SettingDef {
    const char* section;
    const char* key;
    const char* doc;
    std::function<void(ExperimentSpec&, std::string_view, const std::string&)> apply;
    std::function<std::string(const ExperimentSpec&)> render;
};

template <typename Get>
SettingDef def_double(const char* section, const char* key, const char* doc, Get get) {
    return {section, key, doc,
            [get](ExperimentSpec& s, std::string_view v, const std::string& ctx) {
                get(s) = to_double(v, ctx);
            },
            [get](const ExperimentSpec& s) { return fmt_double(get(const_cast<ExperimentSpec&>(s))); }};
}

template <typename Get>
SettingDef def_int(const char* section, const char* key, const char* doc, Get get) {
    return {section, key, doc,
            [get](ExperimentSpec& s, std::string_view v, const std::string& ctx) {
                get(s) = to_int(v, ctx);
            },
            [get](const ExperimentSpec& s) {
                return std::to_string(get(const_cast<ExperimentSpec&>(s)));
            }};
}

template <typename Get>
SettingDef def_bool(const char* section, const char* key, const char* doc, Get get) {
    return {section, key, doc,
            [get](ExperimentSpec& s, std::string_view v, const std::string& ctx) {
                get(s) = to_bool(v, ctx);
            },
            [get](const ExperimentSpec& s) {
                return get(const_cast<ExperimentSpec&>(s)) ? std::string("true")
                                                           : std::string("false");
            }};
}

const std::vector<SettingDef>& defs() {
    static const std::vector<SettingDef> table = [] {
        std::vector<SettingDef> d;
        auto add = [&d](SettingDef def) { d.push_back(std::move(def)); };

        // --- battery ---
        add(def_double("battery", "capacity_j", "battery capacity (J)",
                       [](ExperimentSpec& s) -> double& { return s.sim.energy.capacity_j; }));
        add(def_double("battery", "e_min_j", "soft floor the planner keeps the battery above (J)",
                       [](ExperimentSpec& s) -> double& { return s.sim.energy.e_min_j; }));
        add(def_double("battery", "e_max_j", "planning ceiling on the battery level (J)",
                       [](ExperimentSpec& s) -> double& { return s.sim.energy.e_max_j; }));
        add(def_double("battery", "e_target_j", "level each day must end at or above (J)",
                       [](ExperimentSpec& s) -> double& { return s.sim.energy.e_target_j; }));
        add(def_double("battery", "e_charge_per_interval_j",
                       "energy added by one charging interval (J)",
                       [](ExperimentSpec& s) -> double& {
                           return s.sim.energy.e_charge_per_interval_j;
                       }));
        add(def_double("battery", "harvest_efficiency",
                       "fraction of harvested energy that reaches the battery",
                       [](ExperimentSpec& s) -> double& { return s.sim.energy.harvest_efficiency; }));
        add(def_int("battery", "horizon_intervals", "intervals per planning day",
                    [](ExperimentSpec& s) -> int& { return s.sim.energy.horizon_intervals; }));
        add(def_double("battery", "interval_seconds", "length of one interval (s)",
                       [](ExperimentSpec& s) -> double& { return s.sim.energy.interval_seconds; }));

        // --- policy ---
        add(def_double("policy", "a_min", "minimum mean sensing accuracy per interval",
                       [](ExperimentSpec& s) -> double& { return s.sim.a_min; }));
        add(def_double("policy", "k_sigma",
                       "forecast robustness: plan against mean - k_sigma * stddev",
                       [](ExperimentSpec& s) -> double& { return s.sim.k_sigma; }));
        add(def_bool("policy", "ideal_predictions",
                     "substitute actual harvest for forecasts (ablation)",
                     [](ExperimentSpec& s) -> bool& { return s.sim.ideal_predictions; }));
        add({"policy", "critical_activities",
             "activities that forbid charging (comma list)",
             [](ExperimentSpec& s, std::string_view v, const std::string& ctx) {
                 s.sim.critical_set = to_activity_set(v, ctx);
             },
             [](const ExperimentSpec& s) {
                 std::vector<std::string> names;
                 for (ActivityLabel a : s.sim.critical_set) names.push_back(lower(activity_name(a)));
                 return join(names);
             }});
        add(def_double("policy", "mask_fraction",
                       "fraction of observed days an hour must be critical in to be masked",
                       [](ExperimentSpec& s) -> double& { return s.sim.mask_fraction; }));
        add({"policy", "accuracy_profile",
             "consumption:accuracy breakpoints, piecewise linear between them",
             [](ExperimentSpec& s, std::string_view v, const std::string& ctx) {
                 s.sim.profile.points = to_profile(v, ctx);
             },
             [](const ExperimentSpec& s) {
                 std::vector<std::string> parts;
                 for (const auto& [cons, acc] : s.sim.profile.points) {
                     parts.push_back(fmt_double(cons) + ":" + fmt_double(acc));
                 }
                 return join(parts);
             }});

        // --- climate ---
        add(def_double("climate", "base_peak_w_m2", "clear-sky noon irradiance at the equinox",
                       [](ExperimentSpec& s) -> double& { return s.climate.base_peak_w_m2; }));
        add(def_double("climate", "seasonal_amplitude", "summer/winter swing of the noon peak",
                       [](ExperimentSpec& s) -> double& { return s.climate.seasonal_amplitude; }));
        add(def_double("climate", "daylight_mean_h", "mean daylight hours",
                       [](ExperimentSpec& s) -> double& { return s.climate.daylight_mean_h; }));
        add(def_double("climate", "daylight_amplitude_h", "seasonal daylight swing (h)",
                       [](ExperimentSpec& s) -> double& { return s.climate.daylight_amplitude_h; }));
        add(def_double("climate", "cloud_min", "lower bound of the per-day cloudiness factor",
                       [](ExperimentSpec& s) -> double& { return s.climate.cloud_min; }));
        add(def_double("climate", "cloud_max", "upper bound of the per-day cloudiness factor",
                       [](ExperimentSpec& s) -> double& { return s.climate.cloud_max; }));
        add(def_int("climate", "start_day_of_year", "day of year (0-based) the trace starts on",
                    [](ExperimentSpec& s) -> int& { return s.climate.start_day_of_year; }));

        // --- activity ---
        add(def_int("activity", "exercise_intervals", "daily exercise block length (intervals)",
                    [](ExperimentSpec& s) -> int& { return s.activity.exercise_intervals; }));
        add(def_int("activity", "work_intervals", "weekday work block length (intervals)",
                    [](ExperimentSpec& s) -> int& { return s.activity.work_intervals; }));
        add(def_int("activity", "wake_hour_min", "earliest wake hour",
                    [](ExperimentSpec& s) -> int& { return s.activity.wake_hour_min; }));
        add(def_int("activity", "wake_hour_max", "latest wake hour",
                    [](ExperimentSpec& s) -> int& { return s.activity.wake_hour_max; }));
        add(def_int("activity", "bed_hour_min", "earliest bed hour",
                    [](ExperimentSpec& s) -> int& { return s.activity.bed_hour_min; }));
        add(def_int("activity", "bed_hour_max", "latest bed hour",
                    [](ExperimentSpec& s) -> int& { return s.activity.bed_hour_max; }));
        add(def_double("activity", "outdoor_leisure_prob",
                       "chance a daytime leisure hour is spent outdoors",
                       [](ExperimentSpec& s) -> double& { return s.activity.outdoor_leisure_prob; }));

        // --- harvesters ---
        add(def_double("harvesters", "pv_area_m2", "PV cell area (m^2)",
                       [](ExperimentSpec& s) -> double& { return s.panel.area_m2; }));
        add(def_double("harvesters", "pv_efficiency", "PV conversion efficiency",
                       [](ExperimentSpec& s) -> double& { return s.panel.efficiency; }));
        add(def_double("harvesters", "motion_baseline_w",
                       "motion harvester output at full intensity (W)",
                       [](ExperimentSpec& s) -> double& { return s.motion_baseline_w; }));
        add(def_int("harvesters", "motion_harvesters", "number of motion harvesters",
                    [](ExperimentSpec& s) -> int& { return s.motion_harvesters; }));
        add(def_double("harvesters", "intensity_sleep", "motion intensity while asleep",
                       [](ExperimentSpec& s) -> double& { return s.intensities.sleep; }));
        add(def_double("harvesters", "intensity_work", "motion intensity at work",
                       [](ExperimentSpec& s) -> double& { return s.intensities.work; }));
        add(def_double("harvesters", "intensity_exercise", "motion intensity while exercising",
                       [](ExperimentSpec& s) -> double& { return s.intensities.exercise; }));
        add(def_double("harvesters", "intensity_leisure", "motion intensity during leisure",
                       [](ExperimentSpec& s) -> double& { return s.intensities.leisure; }));
        add(def_double("harvesters", "intensity_other", "motion intensity for other activity",
                       [](ExperimentSpec& s) -> double& { return s.intensities.other; }));
        add(def_bool("harvesters", "gate_pv_by_location",
                     "zero PV intake during indoor intervals",
                     [](ExperimentSpec& s) -> bool& { return s.gate_pv_by_location; }));

        // --- experiment ---
        add(def_int("experiment", "users", "number of simulated users",
                    [](ExperimentSpec& s) -> int& { return s.users; }));
        add(def_int("experiment", "training_days", "leading days reserved for predictor training",
                    [](ExperimentSpec& s) -> int& { return s.training_days; }));
        add(def_int("experiment", "eval_days", "evaluation days after training",
                    [](ExperimentSpec& s) -> int& { return s.eval_days; }));
        add({"experiment", "seed", "master random seed",
             [](ExperimentSpec& s, std::string_view v, const std::string& ctx) {
                 s.seed = to_u64(v, ctx);
             },
             [](const ExperimentSpec& s) { return std::to_string(s.seed); }});
        add({"experiment", "exercise_windows",
             "exercise block lengths cycled over users (comma list of intervals)",
             [](ExperimentSpec& s, std::string_view v, const std::string& ctx) {
                 s.exercise_windows = to_int_list(v, ctx);
             },
             [](const ExperimentSpec& s) {
                 std::vector<std::string> parts;
                 for (int w : s.exercise_windows) parts.push_back(std::to_string(w));
                 return join(parts);
             }});
        add({"experiment", "policies", "policies a comparison runs (comma list)",
             [](ExperimentSpec& s, std::string_view v, const std::string& ctx) {
                 s.policies = to_policy_list(v, ctx);
             },
             [](const ExperimentSpec& s) {
                 std::vector<std::string> parts;
                 for (Policy p : s.policies) parts.push_back(policy_name(p));
                 return join(parts);
             }});
        add(def_int("experiment", "jobs", "worker threads (1 = fully sequential)",
                    [](ExperimentSpec& s) -> int& { return s.jobs; }));
        add(def_double("experiment", "initial_battery_j",
                       "start-of-run battery level (J); negative = start at e_target_j",
                       [](ExperimentSpec& s) -> double& { return s.initial_battery_j; }));

        // --- predictor ---
        add(def_int("predictor", "trees", "trees in the forecast ensemble",
                    [](ExperimentSpec& s) -> int& { return s.ensemble.n_trees; }));
        add(def_int("predictor", "max_depth", "maximum tree depth",
                    [](ExperimentSpec& s) -> int& { return s.ensemble.max_depth; }));
        add(def_int("predictor", "min_samples_leaf", "minimum rows per leaf",
                    [](ExperimentSpec& s) -> int& { return s.ensemble.min_samples_leaf; }));
        return d;
    }();
    return table;
}

const SettingDef* find_def(std::string_view key) {
    for (const SettingDef& d : defs()) {
        if (key == d.key) return &d;
    }
    return nullptr;
}

} // namespace

void apply_setting(ExperimentSpec& spec, std::string_view key, std::string_view value) {
    std::string_view k = trim(key);
    const SettingDef* def = find_def(k);
    if (def == nullptr) {
        throw ConfigError("unknown setting '" + std::string(k) + "'");
    }
    def->apply(spec, trim(value), "setting '" + std::string(k) + "'");
}

ExperimentSpec parse_settings(const std::string& text, const std::string& origin,
                              ExperimentSpec base) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string_view body = trim(line);
        if (body.empty()) continue;
        std::size_t eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(origin + " line " + std::to_string(line_no)
                              + ": expected 'key = value', got '" + std::string(body) + "'");
        }
        try {
            apply_setting(base, body.substr(0, eq), body.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return base;
}

ExperimentSpec load_settings_file(const std::string& path, ExperimentSpec base) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open config file '" + path + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_settings(text.str(), path, std::move(base));
}

std::vector<std::string> apply_env_overrides(ExperimentSpec& spec) {
    std::vector<std::string> applied;
    for (const SettingDef& d : defs()) {
        std::string name = std::string(kEnvPrefix) + upper(d.key);
        const char* value = std::getenv(name.c_str());
        if (value == nullptr) continue;
        d.apply(spec, value, "environment variable " + name);
        applied.push_back(d.key);
    }
    return applied;
}

std::vector<std::string> setting_keys() {
    std::vector<std::string> keys;
    for (const SettingDef& d : defs()) keys.push_back(d.key);
    return keys;
}

std::string render_settings(const ExperimentSpec& spec) {
    std::string out;
    for (const SettingDef& d : defs()) {
        out += d.key;
        out += " = ";
        out += d.render(spec);
        out += "\n";
    }
    return out;
}

std::string default_settings_reference() {
    ExperimentSpec spec;
    std::string out = "# Default configuration. Every key is optional; an empty file runs\n"
                      "# exactly this scenario. Environment variables named ADAEM_<KEY>\n"
                      "# (uppercased) override the file; command-line flags override both.\n";
    const char* section = "";
    for (const SettingDef& d : defs()) {
        if (std::string_view(section) != d.section) {
            section = d.section;
            out += "\n# --- ";
            out += section;
            out += " ---\n";
        }
        out += d.key;
        out += " = ";
        out += d.render(spec);
        out += "  # ";
        out += d.doc;
        out += "\n";
    }
    return out;
}

} // namespace adaem
