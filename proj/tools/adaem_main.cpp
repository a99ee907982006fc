// adaem: command-line front end for the energy-management toolkit.
//
// Subcommands: gen-data, train, simulate, compare, sweep-amin. Settings come
// from (lowest to highest precedence) built-in defaults, --config file,
// ADAEM_* environment variables, then explicit flags. Every run drops a
// config_snapshot under its output directory that reproduces it bit-exactly.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "adaem/csv.hpp"
#include "adaem/errors.hpp"
#include "adaem/metrics.hpp"
#include "adaem/predictor.hpp"
#include "adaem/settings.hpp"
#include "adaem/sim.hpp"

namespace fs = std::filesystem;
using namespace adaem;

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t hash_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path.string() + "' for hashing");
    std::uint64_t h = kFnvOffset;
    char buf[1 << 15];
    while (in.read(buf, sizeof buf), in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= kFnvPrime;
        }
    }
    return h;
}

std::string hex64(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// Settings overrides gathered from flags, applied on top of config file and
// environment in the order the flags appeared.
struct CommonOpts {
    std::string config;
    std::vector<std::pair<std::string, std::string>> overrides;
};

// Wire `flag` so that passing it records a (key, raw value) settings
// override; apply_setting later validates and reports bad values by key.
void override_option(CLI::App* cmd, CommonOpts& opts, const std::string& flag,
                     const std::string& key, const std::string& desc) {
    cmd->add_option_function<std::string>(
        flag, [&opts, key](const std::string& v) { opts.overrides.emplace_back(key, v); }, desc);
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config, "flat key=value settings file ('#' comments)");
    cmd->add_option_function<std::vector<std::string>>(
        "--set",
        [&opts](const std::vector<std::string>& pairs) {
            for (const std::string& pair : pairs) {
                std::size_t eq = pair.find('=');
                if (eq == std::string::npos) {
                    throw CLI::ValidationError("--set", "expected KEY=VALUE, got '" + pair + "'");
                }
                opts.overrides.emplace_back(pair.substr(0, eq), pair.substr(eq + 1));
            }
        },
        "KEY=VALUE settings override, repeatable (see --print-default-config)");
    override_option(cmd, opts, "--seed", "seed", "master random seed");
    override_option(cmd, opts, "--jobs", "jobs", "worker threads, default 1 (deterministic either way)");
}

void add_prediction_flags(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_flag_callback(
        "--ideal-predictions",
        [&opts] { opts.overrides.emplace_back("ideal_predictions", "true"); },
        "plan on the actual harvest instead of forecasts");
}

ExperimentSpec resolve_spec(const CommonOpts& opts) {
    ExperimentSpec spec;
    if (!opts.config.empty()) spec = load_settings_file(opts.config);
    apply_env_overrides(spec);
    for (const auto& [key, value] : opts.overrides) apply_setting(spec, key, value);
    return spec;
}

// ---------------------------------------------------------------------------
// Dataset directory layout: one shared irradiance.csv plus per-user
// userN_activity.csv and userN_harvest.csv.
// ---------------------------------------------------------------------------

std::string user_file(int user, const char* kind) {
    return "user" + std::to_string(user) + "_" + kind + ".csv";
}

struct Dataset {
    std::vector<UserTraces> traces;
    int days = 0;
    std::uint64_t input_hash = 0;
};

Dataset load_dataset(const fs::path& dir, double interval_seconds) {
    Dataset out;
    std::uint64_t h = kFnvOffset;
    for (int u = 0;; ++u) {
        const fs::path harvest_path = dir / user_file(u, "harvest");
        const fs::path activity_path = dir / user_file(u, "activity");
        if (!fs::exists(harvest_path) || !fs::exists(activity_path)) {
            if (u == 0) {
                throw ParseError("no user0_harvest.csv / user0_activity.csv under '"
                                 + dir.string() + "'");
            }
            break;
        }
        UserTraces traces;
        traces.harvest = load_harvest_csv(harvest_path.string(), interval_seconds);
        traces.activities = load_activity_csv(activity_path.string(), interval_seconds);
        const int days = traces.activities.days();
        if (static_cast<int>(traces.harvest.values_j.size())
            != days * traces.activities.intervals_per_day) {
            throw ParseError(harvest_path.string() + ": harvest rows do not cover the "
                             + std::to_string(days) + " days in " + activity_path.string());
        }
        if (u == 0) {
            out.days = days;
        } else if (days != out.days) {
            throw ParseError(activity_path.string() + ": expected " + std::to_string(out.days)
                             + " days like user0, got " + std::to_string(days));
        }
        h ^= hash_file(harvest_path);
        h *= kFnvPrime;
        h ^= hash_file(activity_path);
        h *= kFnvPrime;
        out.traces.push_back(std::move(traces));
    }
    out.input_hash = h;
    return out;
}

void write_snapshot(const fs::path& path, const std::string& command,
                    const ExperimentSpec& spec,
                    const std::vector<std::pair<std::string, std::uint64_t>>& input_hashes) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path.string() + "'");
    out << "# run snapshot; valid as a --config file\n";
    out << "# command: " << command << "\n";
    for (const auto& [name, hash] : input_hashes) {
        out << "# input_hash_" << name << " = " << hex64(hash) << "\n";
    }
    out << render_settings(spec);
}

std::string quote_command(int argc, char** argv) {
    std::string out;
    for (int i = 0; i < argc; ++i) {
        if (i) out += ' ';
        out += argv[i];
    }
    return out;
}

// Resolved inputs for simulate/compare: either a dataset directory or traces
// generated from the settings. Loading adjusts users and eval_days to the data.
struct RunInputs {
    std::vector<UserTraces> traces;
    TreeEnsemble model;
    std::vector<std::pair<std::string, std::uint64_t>> hashes;
};

RunInputs gather_inputs(ExperimentSpec& spec, const std::string& data_dir,
                        const std::string& model_path) {
    RunInputs in;
    if (!data_dir.empty()) {
        Dataset ds = load_dataset(data_dir, spec.sim.energy.interval_seconds);
        spec.users = static_cast<int>(ds.traces.size());
        spec.eval_days = ds.days - spec.training_days;
        if (spec.eval_days < 1) {
            throw ConfigError("training_days (" + std::to_string(spec.training_days)
                              + ") leaves no evaluation days in the " + std::to_string(ds.days)
                              + "-day dataset");
        }
        in.traces = std::move(ds.traces);
        in.hashes.emplace_back("data", ds.input_hash);
    } else {
        in.traces = build_user_traces(spec);
    }
    if (!model_path.empty()) {
        in.model = load_model(model_path);
        in.hashes.emplace_back("model", hash_file(model_path));
    }
    return in;
}

// ---------------------------------------------------------------------------
// Output writers beyond the metric tables.
// ---------------------------------------------------------------------------

void write_plan_csvs(const fs::path& dir, const ExperimentResult& result) {
    fs::create_directories(dir);
    for (const PolicyRun& run : result.runs) {
        for (std::size_t u = 0; u < run.user_days.size(); ++u) {
            const fs::path path =
                dir / (std::string(policy_name(run.policy)) + "_user" + std::to_string(u)
                      + "_plans.csv");
            std::ofstream out(path);
            if (!out) throw ParseError("cannot write '" + path.string() + "'");
            out << "day,interval,activity,charge,consumption_j,accuracy,battery_j\n";
            const ActivitySchedule& schedule =
                result.traces[u].activities;
            for (std::size_t d = 0; d < run.user_days[u].size(); ++d) {
                const DayResult& day = run.user_days[u][d];
                const int horizon = static_cast<int>(day.charge_flags.size());
                const int base = (result.spec.training_days + static_cast<int>(d)) * horizon;
                for (int t = 0; t < horizon; ++t) {
                    out << d << ',' << t << ','
                        << activity_name(schedule.labels[static_cast<std::size_t>(base + t)])
                        << ',' << (day.charge_flags[static_cast<std::size_t>(t)] ? 1 : 0) << ','
                        << fmt_double(day.consumption_j[static_cast<std::size_t>(t)]) << ','
                        << fmt_double(day.accuracy[static_cast<std::size_t>(t)]) << ','
                        << fmt_double(day.battery_j[static_cast<std::size_t>(t) + 1]) << '\n';
                }
            }
        }
    }
}

struct PolicySummary {
    double median_charging = 0.0;
    double median_savings = 0.0;
    double mean_accuracy = 0.0;
    int violation_days = 0;
    int infeasible_days = 0;
    int days = 0;
};

PolicySummary summarize_policy(const std::vector<DailyRecord>& daily, Policy policy) {
    PolicySummary s;
    std::vector<double> charging;
    std::vector<double> savings;
    double acc = 0.0;
    for (const DailyRecord& r : daily) {
        if (r.policy != policy) continue;
        charging.push_back(r.charging_j);
        savings.push_back(r.savings_j);
        acc += r.mean_accuracy;
        if (r.violations > 0) ++s.violation_days;
        if (r.infeasible) ++s.infeasible_days;
        ++s.days;
    }
    if (s.days == 0) return s;
    std::sort(charging.begin(), charging.end());
    std::sort(savings.begin(), savings.end());
    s.median_charging = quantile_sorted(charging, 0.5);
    s.median_savings = quantile_sorted(savings, 0.5);
    s.mean_accuracy = acc / s.days;
    return s;
}

void print_policy_table(const MetricTables& tables, const std::vector<Policy>& policies) {
    std::printf("%-15s %14s %13s %9s %10s %10s\n", "policy", "med charge (J)", "med saved (J)",
                "mean acc", "viol days", "infeasible");
    for (Policy p : policies) {
        const PolicySummary s = summarize_policy(tables.daily, p);
        std::printf("%-15s %14.2f %13.3f %9.4f %10d %10d\n", policy_name(p), s.median_charging,
                    s.median_savings, s.mean_accuracy, s.violation_days, s.infeasible_days);
    }
}

// ---------------------------------------------------------------------------
// Subcommand bodies.
// ---------------------------------------------------------------------------

int run_gen_data(const CommonOpts& opts, int days, const std::string& out_dir,
                 const std::string& command) {
    ExperimentSpec spec = resolve_spec(opts);
    if (days > 0) {
        // --days is the total trace length; splitting it into training and
        // evaluation happens at simulate/compare time.
        spec.training_days = 0;
        spec.eval_days = days;
    }
    spec.validate();
    std::vector<UserTraces> traces = build_user_traces(spec);

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    IrradianceSeries sky = generate_irradiance(spec.seed, spec.total_days(), spec.climate);
    write_irradiance_csv((dir / "irradiance.csv").string(), sky);
    for (std::size_t u = 0; u < traces.size(); ++u) {
        write_activity_csv((dir / user_file(static_cast<int>(u), "activity")).string(),
                           traces[u].activities);
        write_harvest_csv((dir / user_file(static_cast<int>(u), "harvest")).string(),
                          traces[u].harvest);
    }
    write_snapshot(dir / "config_snapshot", command, spec, {});
    std::printf("wrote %d users x %d days under %s\n", spec.users, spec.total_days(),
                out_dir.c_str());
    return 0;
}

int run_train(const CommonOpts& opts, const std::string& data_dir, const std::string& model_out,
              const std::string& command) {
    ExperimentSpec spec = resolve_spec(opts);
    Dataset ds = load_dataset(data_dir, spec.sim.energy.interval_seconds);

    std::vector<TrainingSet> per_user;
    std::size_t total_rows = 0;
    for (const UserTraces& user : ds.traces) {
        per_user.push_back(make_training_rows(user.harvest, user.activities));
        total_rows += per_user.back().features.size();
    }
    EnsembleParams params = spec.ensemble;
    params.seed = spec.seed;

    const HoldoutReport report = holdout_evaluate(per_user, params);

    // The shipped model uses every row; the held-out scores above describe an
    // identically configured fit on the leading 80%.
    TrainingSet all;
    for (TrainingSet& rows : per_user) {
        std::move(rows.features.begin(), rows.features.end(), std::back_inserter(all.features));
        all.targets_j.insert(all.targets_j.end(), rows.targets_j.begin(), rows.targets_j.end());
    }
    TreeEnsemble model = fit(all, params);
    save_model(model_out, model);
    write_snapshot(fs::path(model_out).string() + ".snapshot", command, spec,
                   {{"data", ds.input_hash}});

    std::printf("fitted %d trees on %zu rows from %zu users\n", params.n_trees, total_rows,
                ds.traces.size());
    std::printf("held-out MAE: %.6f J/interval (model) vs %.6f J/interval (persistence)\n",
                report.model_mae, report.persistence_mae);
    std::printf("model written to %s\n", model_out.c_str());
    return 0;
}

int run_simulate(const CommonOpts& opts, const std::string& data_dir,
                 const std::string& model_path, const std::string& policy,
                 const std::string& out_dir, const std::string& command) {
    ExperimentSpec spec = resolve_spec(opts);
    apply_setting(spec, "policies", policy);
    RunInputs in = gather_inputs(spec, data_dir, model_path);

    ExperimentResult result = run_experiment_on(spec, std::move(in.traces), std::move(in.model));
    const MetricTables tables = compute_metrics(result);

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_daily_csv((dir / "daily.csv").string(), tables.daily);
    write_plan_csvs(dir / "plans", result);
    write_snapshot(dir / "config_snapshot", command, spec, in.hashes);

    print_policy_table(tables, spec.policies);
    std::printf("daily records and plans written under %s\n", out_dir.c_str());
    return 0;
}

int run_compare(const CommonOpts& opts, const std::string& data_dir,
                const std::string& model_path, const std::string& policies,
                const std::string& out_dir, const std::string& command) {
    ExperimentSpec spec = resolve_spec(opts);
    if (!policies.empty()) apply_setting(spec, "policies", policies);
    RunInputs in = gather_inputs(spec, data_dir, model_path);

    ExperimentResult result = run_experiment_on(spec, std::move(in.traces), std::move(in.model));
    const MetricTables tables = compute_metrics(result);

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_daily_csv((dir / "daily.csv").string(), tables.daily);
    write_monthly_csv((dir / "metrics_monthly.csv").string(), tables.monthly);
    write_histogram_csv((dir / "violations_hist.csv").string(), tables.histogram);
    write_snapshot(dir / "config_snapshot", command, spec, in.hashes);

    print_policy_table(tables, spec.policies);
    std::printf("metric tables written under %s\n", out_dir.c_str());
    return 0;
}

int run_sweep(const CommonOpts& opts, const std::string& values, const std::string& policies,
              const std::string& out_dir, const std::string& command) {
    ExperimentSpec spec = resolve_spec(opts);
    apply_setting(spec, "policies", policies);

    std::vector<double> a_mins;
    {
        std::string err_ctx = "option --values";
        std::size_t start = 0;
        while (start <= values.size()) {
            std::size_t comma = values.find(',', start);
            if (comma == std::string::npos) comma = values.size();
            std::string tok(trim(values.substr(start, comma - start)));
            if (!tok.empty()) {
                char* end = nullptr;
                double v = std::strtod(tok.c_str(), &end);
                if (end != tok.c_str() + tok.size()) {
                    throw ConfigError(err_ctx + ": expected a number, got '" + tok + "'");
                }
                a_mins.push_back(v);
            }
            start = comma + 1;
        }
        if (a_mins.empty()) throw ConfigError(err_ctx + ": no values given");
    }

    // Traces and forecaster do not depend on a_min, so build them once.
    std::vector<UserTraces> traces = build_user_traces(spec);
    TreeEnsemble model;
    bool needs_model = false;
    for (Policy p : spec.policies) {
        if (p == Policy::AdaEM && !spec.sim.ideal_predictions) needs_model = true;
    }
    if (needs_model) model = train_on_leading_days(spec, traces);

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    const fs::path csv_path = dir / "sweep_amin.csv";
    std::ofstream out(csv_path);
    if (!out) throw ParseError("cannot write '" + csv_path.string() + "'");
    out << "a_min,policy,min,q1,median,q3,max\n";

    for (double a_min : a_mins) {
        ExperimentSpec point = spec;
        point.sim.a_min = a_min;
        ExperimentResult result = run_experiment_on(point, traces, model);
        const MetricTables tables = compute_metrics(result);
        std::printf("a_min %.2f:", a_min);
        for (Policy p : point.policies) {
            std::vector<double> charging;
            for (const DailyRecord& r : tables.daily) {
                if (r.policy == p) charging.push_back(r.charging_j);
            }
            std::sort(charging.begin(), charging.end());
            out << fmt_double(a_min) << ',' << policy_name(p) << ','
                << fmt_double(charging.front()) << ',' << fmt_double(quantile_sorted(charging, 0.25))
                << ',' << fmt_double(quantile_sorted(charging, 0.5)) << ','
                << fmt_double(quantile_sorted(charging, 0.75)) << ',' << fmt_double(charging.back())
                << '\n';
            std::printf("  %s median %.1f J", policy_name(p), quantile_sorted(charging, 0.5));
        }
        std::printf("\n");
    }
    out.close();
    write_snapshot(dir / "config_snapshot", command, spec, {});
    std::printf("sweep table written to %s\n", csv_path.string().c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        if (std::string_view(argv[i]) == "--print-default-config") {
            std::cout << default_settings_reference();
            return 0;
        }
    }

    CLI::App app{"Adaptive energy management for energy-harvesting wearables: synthetic traces,\n"
                 "harvest forecasting, robust charging plans, and policy comparisons.\n"
                 "Settings precedence: defaults < --config file < ADAEM_* environment < flags.\n"
                 "Pass --print-default-config to list every key with its default."};
    app.require_subcommand(1);

    const std::string command = quote_command(argc, argv);

    CommonOpts gen_opts;
    int gen_days = -1;
    std::string gen_out;
    CLI::App* gen = app.add_subcommand("gen-data", "generate synthetic irradiance/activity/harvest traces");
    add_common(gen, gen_opts);
    override_option(gen, gen_opts, "--users", "users", "number of users");
    gen->add_option("--days", gen_days, "total days to generate (default training_days + eval_days)")
        ->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_out, "output directory")->required();

    CommonOpts train_opts;
    std::string train_data;
    std::string train_out;
    CLI::App* train = app.add_subcommand("train", "fit the harvest forecaster on a dataset");
    add_common(train, train_opts);
    train->add_option("--data", train_data, "dataset directory from gen-data")->required();
    train->add_option("--out", train_out, "model output file")->required();
    override_option(train, train_opts, "--trees", "trees", "trees in the ensemble");
    override_option(train, train_opts, "--depth", "max_depth", "maximum tree depth");
    override_option(train, train_opts, "--min-leaf", "min_samples_leaf", "minimum rows per leaf");

    CommonOpts sim_opts;
    std::string sim_data;
    std::string sim_model;
    std::string sim_policy;
    std::string sim_out;
    CLI::App* sim = app.add_subcommand("simulate", "run one policy and write daily results and plans");
    add_common(sim, sim_opts);
    add_prediction_flags(sim, sim_opts);
    sim->add_option("--data", sim_data, "dataset directory (default: generate from settings)");
    sim->add_option("--model", sim_model, "forecaster file (default: train on the leading days)");
    sim->add_option("--policy", sim_policy, "adaem, on-demand, energy-neutral, or oracle")
        ->required();
    sim->add_option("--out", sim_out, "output directory")->required();

    CommonOpts cmp_opts;
    std::string cmp_data;
    std::string cmp_model;
    std::string cmp_policies;
    std::string cmp_out;
    CLI::App* cmp = app.add_subcommand("compare", "run several policies on identical traces");
    add_common(cmp, cmp_opts);
    add_prediction_flags(cmp, cmp_opts);
    cmp->add_option("--data", cmp_data, "dataset directory (default: generate from settings)");
    cmp->add_option("--model", cmp_model, "forecaster file (default: train on the leading days)");
    cmp->add_option("--policies", cmp_policies, "comma list (default: all four policies)");
    cmp->add_option("--out", cmp_out, "output directory")->required();

    CommonOpts sweep_opts;
    std::string sweep_values = "0.80,0.85,0.90,0.95";
    std::string sweep_policies = "adaem,oracle";
    std::string sweep_out;
    CLI::App* sweep = app.add_subcommand(
        "sweep-amin", "charging-energy distribution as a function of the accuracy floor");
    add_common(sweep, sweep_opts);
    add_prediction_flags(sweep, sweep_opts);
    sweep->add_option("--values", sweep_values, "comma list of accuracy floors");
    sweep->add_option("--policies", sweep_policies, "comma list of policies to sweep");
    sweep->add_option("--out", sweep_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen_data(gen_opts, gen_days, gen_out, command);
        if (train->parsed()) return run_train(train_opts, train_data, train_out, command);
        if (sim->parsed()) {
            return run_simulate(sim_opts, sim_data, sim_model, sim_policy, sim_out, command);
        }
        if (cmp->parsed()) {
            return run_compare(cmp_opts, cmp_data, cmp_model, cmp_policies, cmp_out, command);
        }
        if (sweep->parsed()) {
            return run_sweep(sweep_opts, sweep_values, sweep_policies, sweep_out, command);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
