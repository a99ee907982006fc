#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "adaem/errors.hpp"
#include "adaem/metrics.hpp"
#include "adaem/sim.hpp"
#include "doctest.h"

using namespace adaem;

namespace {

UserTraces flat_traces(int days, double harvest_j, ActivityLabel label) {
    UserTraces t;
    const std::size_t n = static_cast<std::size_t>(days) * 24;
    t.harvest.values_j.assign(n, harvest_j);
    t.activities.labels.assign(n, label);
    t.activities.outdoor.assign(n, false);
    t.activities.weekend.assign(static_cast<std::size_t>(days), false);
    return t;
}

SimParams default_params() {
    SimParams p;
    p.ideal_predictions = true;
    return p;
}

int count_true(const std::vector<bool>& flags) {
    int n = 0;
    for (bool f : flags) n += f ? 1 : 0;
    return n;
}

// Independent bookkeeping check: the battery delta over the day must equal
// utilized harvest plus charging input minus requested consumption, with the
// underflow credit covering energy the empty battery could not supply.
void check_bookkeeping(const DayResult& day, const SimParams& params) {
    const double delta = day.battery_j.back() - day.battery_j.front();
    double consumed = 0.0;
    for (double c : day.consumption_j) consumed += c;
    const double utilized = params.energy.harvest_efficiency * day.harvest_j - day.overflow_j;
    const double charged = params.energy.e_charge_per_interval_j
                           * static_cast<double>(count_true(day.charge_flags));
    CHECK(std::abs(delta - (utilized + charged - consumed + day.underflow_j)) <= 1e-9);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("a feasible day under exact predictions runs without violations") {
    SimParams params = default_params();
    UserTraces traces = flat_traces(1, 0.0, ActivityLabel::Other);
    PolicyState state;
    state.battery = BatteryState{96.0, 0};

    DayResult day = run_day(Policy::AdaEM, params, traces, nullptr, 0, state);

    CHECK(day.planning_feasible);
    CHECK(day.report.total_interval_violations() == 0);
    CHECK_FALSE(day.report.terminal_violation);
    CHECK(day.battery_j.size() == 25);
    CHECK(day.battery_j.front() == 96.0);
    CHECK(day.battery_j.back() >= 96.0);
    CHECK(day.charging_energy_j == 30.0 * count_true(day.charge_flags));
    CHECK(count_true(day.charge_flags) == 3);
    CHECK(day.min_gap == 24);
    CHECK(day.mean_accuracy == doctest::Approx(0.90));
    CHECK(state.battery.energy_j == day.battery_j.back());
    check_bookkeeping(day, params);
}

TEST_CASE("on-demand does not charge while the battery stays above the floor") {
    SimParams params = default_params();
    UserTraces traces = flat_traces(1, 0.0, ActivityLabel::Other);
    PolicyState state;
    state.battery = BatteryState{140.0, 0};

    DayResult day = run_day(Policy::OnDemand, params, traces, nullptr, 0, state);

    CHECK(count_true(day.charge_flags) == 0);
    CHECK(day.charging_energy_j == 0.0);
    CHECK(day.report.energy_floor_violations == 0);
    CHECK(day.battery_j.back() == doctest::Approx(140.0 - 24.0 * 3.0));
    check_bookkeeping(day, params);
}

TEST_CASE("on-demand hysteresis charges from the floor crossing up to the target") {
    SimParams params = default_params();
    UserTraces traces = flat_traces(1, 0.0, ActivityLabel::Other);
    PolicyState state;
    state.battery = BatteryState{17.0, 0};

    DayResult day = run_day(Policy::OnDemand, params, traces, nullptr, 0, state);

    // One dip below the floor, then a single session that ends at the target.
    CHECK(day.report.energy_floor_violations == 1);
    CHECK(day.battery_j[1] == doctest::Approx(14.0));
    std::vector<bool> expected(24, false);
    expected[1] = expected[2] = expected[3] = expected[4] = true;
    CHECK(day.charge_flags == expected);
    CHECK(day.charging_energy_j == 120.0);
    CHECK(day.min_gap == 24);
    check_bookkeeping(day, params);
}

TEST_CASE("energy-neutral on a zero-harvest day idles at the accuracy floor") {
    SimParams params = default_params();
    UserTraces traces = flat_traces(1, 0.0, ActivityLabel::Other);
    PolicyState state;
    state.battery = BatteryState{96.0, 0};

    DayResult day = run_day(Policy::EnergyNeutral, params, traces, nullptr, 0, state);

    for (double c : day.consumption_j) CHECK(c == 0.0);
    for (double a : day.accuracy) CHECK(a == doctest::Approx(0.80));
    CHECK(day.mean_accuracy == doctest::Approx(0.80));
    CHECK(count_true(day.charge_flags) == 0);
    CHECK(day.report.accuracy_violations == 24);
    CHECK(day.battery_j.back() == doctest::Approx(96.0));
    CHECK(day.savings_j == 0.0);
    check_bookkeeping(day, params);
}

TEST_CASE("overflow is excluded from the savings a day reports") {
    SimParams params = default_params();
    UserTraces traces = flat_traces(1, 0.0, ActivityLabel::Other);
    traces.harvest.values_j[0] = 50.0;
    PolicyState state;
    state.battery = BatteryState{120.0, 0};

    DayResult day = run_day(Policy::OnDemand, params, traces, nullptr, 0, state);

    // 120 + 50 - 3 caps at 160, spilling 7 of the 50 harvested joules.
    CHECK(day.battery_j[1] == doctest::Approx(160.0));
    CHECK(day.overflow_j == doctest::Approx(7.0));
    CHECK(day.harvest_j == doctest::Approx(50.0));
    CHECK(day.savings_j == doctest::Approx(43.0));
    check_bookkeeping(day, params);
}

TEST_CASE("the oracle day is planned once and executes exactly") {
    SimParams params = default_params();
    UserTraces traces = flat_traces(1, 0.0, ActivityLabel::Other);
    PolicyState state;
    state.battery = BatteryState{96.0, 0};

    DayResult day = run_day(Policy::Oracle, params, traces, nullptr, 0, state);

    CHECK(day.planning_feasible);
    CHECK(day.report.total_interval_violations() == 0);
    CHECK_FALSE(day.report.terminal_violation);
    CHECK(count_true(day.charge_flags) == 3);
    CHECK(day.battery_j.back() >= 96.0 - 1e-9);
    check_bookkeeping(day, params);
}

TEST_CASE("a trace that does not cover the requested day is rejected") {
    SimParams params = default_params();
    UserTraces traces = flat_traces(1, 0.0, ActivityLabel::Other);
    PolicyState state;
    state.battery = BatteryState{96.0, 0};

    CHECK_THROWS_AS(run_day(Policy::AdaEM, params, traces, nullptr, 1, state),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_day(Policy::Oracle, params, traces, nullptr, -1, state),
                    std::invalid_argument);

    UserTraces ragged = traces;
    ragged.activities.labels.resize(20);
    CHECK_THROWS_AS(run_day(Policy::OnDemand, params, ragged, nullptr, 0, state),
                    std::invalid_argument);
}

TEST_CASE("the battery state carries across consecutive days") {
    SimParams params = default_params();
    UserTraces traces = flat_traces(2, 1.0, ActivityLabel::Other);
    PolicyState state;
    state.battery = BatteryState{96.0, 0};

    DayResult first = run_day(Policy::AdaEM, params, traces, nullptr, 0, state);
    DayResult second = run_day(Policy::AdaEM, params, traces, nullptr, 1, state);

    CHECK(second.battery_j.front() == first.battery_j.back());
    CHECK(state.battery.energy_j == second.battery_j.back());
}

TEST_CASE("robust forecasts are non-negative and demand an aligned history") {
    ExperimentSpec spec;
    spec.users = 1;
    spec.training_days = 20;
    spec.eval_days = 1;
    spec.seed = 3;
    std::vector<UserTraces> traces = build_user_traces(spec);
    TreeEnsemble model = train_on_leading_days(spec, traces);

    HarvestTrace history;
    history.values_j.assign(traces[0].harvest.values_j.begin(),
                            traces[0].harvest.values_j.begin() + 20 * 24);
    std::vector<double> fc =
        robust_forecast(model, history, traces[0].activities, 20 * 24, 24, 1.0);
    CHECK(fc.size() == 24);
    for (double v : fc) CHECK(v >= 0.0);

    // Larger robustness factors can only lower the worst-case estimates.
    std::vector<double> fc0 =
        robust_forecast(model, history, traces[0].activities, 20 * 24, 24, 0.0);
    for (std::size_t i = 0; i < fc.size(); ++i) CHECK(fc[i] <= fc0[i] + 1e-12);

    CHECK_THROWS_AS(robust_forecast(model, history, traces[0].activities, 100, 4, 1.0),
                    std::invalid_argument);
}

TEST_CASE("experiment traces share one sky and gate sunlight by location") {
    ExperimentSpec spec;
    spec.users = 2;
    spec.training_days = 5;
    spec.eval_days = 5;
    spec.seed = 9;
    std::vector<UserTraces> gated = build_user_traces(spec);

    ExperimentSpec open = spec;
    open.gate_pv_by_location = false;
    std::vector<UserTraces> full = build_user_traces(open);

    REQUIRE(gated.size() == 2);
    bool strictly_less_somewhere = false;
    for (int u = 0; u < 2; ++u) {
        const auto& g = gated[static_cast<std::size_t>(u)];
        const auto& f = full[static_cast<std::size_t>(u)];
        REQUIRE(g.harvest.values_j.size() == f.harvest.values_j.size());
        for (std::size_t i = 0; i < g.harvest.values_j.size(); ++i) {
            CHECK(g.harvest.values_j[i] <= f.harvest.values_j[i] + 1e-12);
            if (g.activities.outdoor[i]) {
                CHECK(g.harvest.values_j[i] == doctest::Approx(f.harvest.values_j[i]));
            } else if (g.harvest.values_j[i] < f.harvest.values_j[i] - 1e-9) {
                strictly_less_somewhere = true;
                // Indoors only the motion harvester contributes.
                const double motion =
                    motion_energy(g.activities.labels[i], 3600.0, spec.motion_baseline_w);
                CHECK(g.harvest.values_j[i] == doctest::Approx(motion));
            }
        }
    }
    CHECK(strictly_less_somewhere);
}

TEST_CASE("an experiment yields one day record per user, day, and policy") {
    ExperimentSpec spec;
    spec.users = 2;
    spec.training_days = 10;
    spec.eval_days = 30;
    spec.seed = 5;
    spec.sim.ideal_predictions = true;
    spec.policies = {Policy::AdaEM, Policy::OnDemand, Policy::EnergyNeutral};

    ExperimentResult result = run_experiment(spec);

    REQUIRE(result.runs.size() == 3);
    int day_results = 0;
    for (const PolicyRun& run : result.runs) {
        REQUIRE(run.user_days.size() == 2);
        for (const auto& days : run.user_days) day_results += static_cast<int>(days.size());
    }
    CHECK(day_results == 180);
    // Ten training days into a November 2nd start: evaluation opens mid
    // November and rolls into December.
    REQUIRE(result.day_month.size() == 30);
    CHECK(result.day_month.front() == 11);
    CHECK(result.day_month.back() == 12);

    for (const PolicyRun& run : result.runs) {
        CHECK(run.trace_hash == result.runs.front().trace_hash);
    }
}

TEST_CASE("identical seeds reproduce an experiment bit for bit") {
    ExperimentSpec spec;
    spec.users = 2;
    spec.training_days = 15;
    spec.eval_days = 20;
    spec.seed = 21;
    spec.policies = {Policy::AdaEM, Policy::Oracle};

    ExperimentResult a = run_experiment(spec);
    ExperimentResult b = run_experiment(spec);
    ExperimentSpec parallel = spec;
    parallel.jobs = 4;
    ExperimentResult c = run_experiment(parallel);

    for (std::size_t p = 0; p < a.runs.size(); ++p) {
        for (std::size_t u = 0; u < a.runs[p].user_days.size(); ++u) {
            for (std::size_t d = 0; d < a.runs[p].user_days[u].size(); ++d) {
                const DayResult& x = a.runs[p].user_days[u][d];
                const DayResult& y = b.runs[p].user_days[u][d];
                const DayResult& z = c.runs[p].user_days[u][d];
                CHECK(x.battery_j == y.battery_j);
                CHECK(x.charge_flags == y.charge_flags);
                CHECK(x.consumption_j == y.consumption_j);
                CHECK(x.battery_j == z.battery_j);
                CHECK(x.charge_flags == z.charge_flags);
                CHECK(x.consumption_j == z.consumption_j);
            }
        }
    }
}

TEST_CASE("every policy closes its energy books on generated traces") {
    ExperimentSpec spec;
    spec.users = 2;
    spec.training_days = 10;
    spec.eval_days = 20;
    spec.seed = 13;
    spec.sim.ideal_predictions = true;

    ExperimentResult result = run_experiment(spec);

    for (const PolicyRun& run : result.runs) {
        for (const auto& days : run.user_days) {
            for (const DayResult& day : days) {
                check_bookkeeping(day, spec.sim);
                CHECK(day.battery_j.size() == 25);
                CHECK(day.charging_energy_j
                      == doctest::Approx(30.0 * count_true(day.charge_flags)));
                for (double level : day.battery_j) {
                    CHECK(level >= -1e-12);
                    CHECK(level <= spec.sim.energy.e_max_j + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("the oracle never needs more than one extra charge over the optimizer") {
    ExperimentSpec spec;
    spec.users = 2;
    spec.training_days = 10;
    spec.eval_days = 40;
    spec.seed = 17;
    spec.sim.ideal_predictions = true;
    spec.policies = {Policy::AdaEM, Policy::Oracle};

    ExperimentResult result = run_experiment(spec);

    int feasible = 0;
    int within = 0;
    for (std::size_t u = 0; u < 2; ++u) {
        for (std::size_t d = 0; d < static_cast<std::size_t>(spec.eval_days); ++d) {
            const DayResult& a = result.runs[0].user_days[u][d];
            const DayResult& o = result.runs[1].user_days[u][d];
            if (!a.planning_feasible || !o.planning_feasible) continue;
            feasible += 1;
            if (o.charging_energy_j
                <= a.charging_energy_j + spec.sim.energy.e_charge_per_interval_j + 1e-9) {
                within += 1;
            }
        }
    }
    REQUIRE(feasible > 0);
    CHECK(static_cast<double>(within) >= 0.95 * static_cast<double>(feasible));
}

TEST_CASE("the fitted forecaster path simulates cleanly") {
    ExperimentSpec spec;
    spec.users = 1;
    spec.training_days = 30;
    spec.eval_days = 10;
    spec.seed = 29;
    spec.sim.ideal_predictions = false;
    spec.sim.k_sigma = 1.0;
    spec.policies = {Policy::AdaEM};

    ExperimentResult result = run_experiment(spec);

    CHECK(!result.model.trees.empty());
    for (const DayResult& day : result.runs[0].user_days[0]) {
        CHECK(day.battery_j.size() == 25);
        check_bookkeeping(day, spec.sim);
        CHECK(day.report.critical_charging_violations == 0);
    }
}

TEST_CASE("monthly summaries are recomputable from the daily records") {
    ExperimentSpec spec;
    spec.users = 2;
    spec.training_days = 10;
    spec.eval_days = 45;
    spec.seed = 31;
    spec.sim.ideal_predictions = true;
    spec.policies = {Policy::AdaEM, Policy::EnergyNeutral};

    ExperimentResult result = run_experiment(spec);
    MetricTables tables = compute_metrics(result);

    CHECK(tables.daily.size() == static_cast<std::size_t>(2 * 2 * 45));

    for (const MonthlyRow& row : tables.monthly) {
        std::vector<double> values;
        for (const DailyRecord& rec : tables.daily) {
            if (rec.policy != row.policy || rec.month != row.month) continue;
            if (row.user >= 0 && rec.user != row.user) continue;
            double v = 0.0;
            if (row.metric == "charging_j") v = rec.charging_j;
            else if (row.metric == "savings_j") v = rec.savings_j;
            else if (row.metric == "mean_accuracy") v = rec.mean_accuracy;
            else v = static_cast<double>(rec.min_gap);
            values.push_back(v);
        }
        REQUIRE(!values.empty());
        std::sort(values.begin(), values.end());
        CHECK(row.min == doctest::Approx(values.front()));
        CHECK(row.median == doctest::Approx(quantile_sorted(values, 0.5)));
        CHECK(row.q3 == doctest::Approx(quantile_sorted(values, 0.75)));
        CHECK(row.max == doctest::Approx(values.back()));
    }

    for (const PolicyRun& run : result.runs) {
        int total = 0;
        for (const ViolationBucket& b : tables.histogram) {
            if (b.policy == run.policy) total += b.day_count;
        }
        CHECK(total == 2 * 45);
    }
}

TEST_CASE("metric csv files round-trip their headers and row counts") {
    ExperimentSpec spec;
    spec.users = 1;
    spec.training_days = 10;
    spec.eval_days = 12;
    spec.seed = 37;
    spec.sim.ideal_predictions = true;
    spec.policies = {Policy::OnDemand};

    MetricTables tables = compute_metrics(run_experiment(spec));
    write_daily_csv("test_sim_daily.csv", tables.daily);
    write_monthly_csv("test_sim_monthly.csv", tables.monthly);
    write_histogram_csv("test_sim_hist.csv", tables.histogram);

    const std::string daily = slurp("test_sim_daily.csv");
    CHECK(daily.rfind("policy,user,day,charging_j,savings_j,mean_accuracy,min_gap,violations,infeasible\n",
                      0) == 0);
    CHECK(std::count(daily.begin(), daily.end(), '\n') == 1 + 12);

    const std::string monthly = slurp("test_sim_monthly.csv");
    CHECK(monthly.rfind("policy,user,month,metric,min,q1,median,q3,max\n", 0) == 0);
    CHECK(std::count(monthly.begin(), monthly.end(), '\n')
          == 1 + static_cast<long>(tables.monthly.size()));
    // Pooled rows carry the "all" marker.
    CHECK(monthly.find("on-demand,all,11,charging_j") != std::string::npos);

    const std::string hist = slurp("test_sim_hist.csv");
    CHECK(hist.rfind("policy,violations_per_day,day_count\n", 0) == 0);

    std::remove("test_sim_daily.csv");
    std::remove("test_sim_monthly.csv");
    std::remove("test_sim_hist.csv");
}

TEST_CASE("calendar helpers agree with a 365-day year") {
    CHECK(month_of_day_of_year(0) == 1);
    CHECK(month_of_day_of_year(30) == 1);
    CHECK(month_of_day_of_year(31) == 2);
    CHECK(month_of_day_of_year(58) == 2);
    CHECK(month_of_day_of_year(59) == 3);
    CHECK(month_of_day_of_year(364) == 12);
    CHECK(month_of_day_of_year(365) == 1);

    std::vector<double> sample = {1.0, 2.0, 3.0, 4.0};
    CHECK(quantile_sorted(sample, 0.0) == 1.0);
    CHECK(quantile_sorted(sample, 0.25) == doctest::Approx(1.75));
    CHECK(quantile_sorted(sample, 0.5) == doctest::Approx(2.5));
    CHECK(quantile_sorted(sample, 1.0) == 4.0);
    CHECK_THROWS_AS(quantile_sorted({}, 0.5), std::invalid_argument);
}

TEST_CASE("policy names parse back to their enum values") {
    for (Policy p : {Policy::AdaEM, Policy::OnDemand, Policy::EnergyNeutral, Policy::Oracle}) {
        CHECK(parse_policy(policy_name(p)) == p);
    }
    CHECK_THROWS_AS(parse_policy("greedy"), ConfigError);
}

TEST_CASE("experiment specs with impossible settings are rejected") {
    ExperimentSpec spec;
    spec.users = 0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = ExperimentSpec{};
    spec.jobs = 0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = ExperimentSpec{};
    spec.policies.clear();
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = ExperimentSpec{};
    spec.sim.mask_fraction = 1.5;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = ExperimentSpec{};
    spec.training_days = 0;
    std::vector<UserTraces> traces = build_user_traces(spec);
    CHECK_THROWS_AS(train_on_leading_days(spec, traces), ConfigError);
}
