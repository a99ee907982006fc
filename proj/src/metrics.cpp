#include "adaem/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "adaem/csv.hpp"
#include "adaem/errors.hpp"

namespace adaem {

namespace {

const char* const kMetricNames[] = {"charging_j", "savings_j", "mean_accuracy", "min_gap"};

double metric_value(const DailyRecord& r, int metric) {
    switch (metric) {
        case 0: return r.charging_j;
        case 1: return r.savings_j;
        case 2: return r.mean_accuracy;
        default: return static_cast<double>(r.min_gap);
    }
}

MonthlyRow summarize(Policy policy, int user, int month, int metric,
                     std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    MonthlyRow row;
    row.policy = policy;
    row.user = user;
    row.month = month;
    row.metric = kMetricNames[metric];
    row.min = values.front();
    row.q1 = quantile_sorted(values, 0.25);
    row.median = quantile_sorted(values, 0.5);
    row.q3 = quantile_sorted(values, 0.75);
    row.max = values.back();
    return row;
}

FILE* open_for_write(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (f == nullptr) throw ParseError("cannot open '" + path + "' for writing");
    return f;
}

} // namespace

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty sample");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

MetricTables compute_metrics(const ExperimentResult& result) {
    MetricTables tables;
    for (const PolicyRun& run : result.runs) {
        for (std::size_t u = 0; u < run.user_days.size(); ++u) {
            const std::vector<DayResult>& days = run.user_days[u];
            for (std::size_t d = 0; d < days.size(); ++d) {
                const DayResult& day = days[d];
                DailyRecord rec;
                rec.policy = run.policy;
                rec.user = static_cast<int>(u);
                rec.day = static_cast<int>(d);
                rec.month = result.day_month[d];
                rec.charging_j = day.charging_energy_j;
                rec.savings_j = day.savings_j;
                rec.mean_accuracy = day.mean_accuracy;
                rec.min_gap = day.min_gap;
                rec.violations = day.report.total_interval_violations();
                rec.infeasible = !day.planning_feasible;
                tables.daily.push_back(rec);
            }
        }
    }

    // Monthly five-number summaries, per user and pooled (user == -1).
    const int users = result.spec.users;
    for (const PolicyRun& run : result.runs) {
        for (int metric = 0; metric < 4; ++metric) {
            std::map<std::pair<int, int>, std::vector<double>> groups;
            for (const DailyRecord& rec : tables.daily) {
                if (rec.policy != run.policy) continue;
                groups[{rec.user, rec.month}].push_back(metric_value(rec, metric));
                groups[{-1, rec.month}].push_back(metric_value(rec, metric));
            }
            for (int user = 0; user <= users; ++user) {
                const int key = user == users ? -1 : user;
                for (int month = 1; month <= 12; ++month) {
                    auto it = groups.find({key, month});
                    if (it == groups.end()) continue;
                    tables.monthly.push_back(
                        summarize(run.policy, key, month, metric, it->second));
                }
            }
        }
    }

    for (const PolicyRun& run : result.runs) {
        std::map<int, int> counts;
        for (const DailyRecord& rec : tables.daily) {
            if (rec.policy == run.policy) counts[rec.violations] += 1;
        }
        for (const auto& [violations, day_count] : counts) {
            tables.histogram.push_back({run.policy, violations, day_count});
        }
    }
    return tables;
}

void write_daily_csv(const std::string& path, const std::vector<DailyRecord>& daily) {
    FILE* f = open_for_write(path);
    std::fputs("policy,user,day,charging_j,savings_j,mean_accuracy,min_gap,violations,infeasible\n",
               f);
    for (const DailyRecord& r : daily) {
        std::fprintf(f, "%s,%d,%d,%s,%s,%s,%d,%d,%d\n", policy_name(r.policy), r.user, r.day,
                     fmt_double(r.charging_j).c_str(), fmt_double(r.savings_j).c_str(),
                     fmt_double(r.mean_accuracy).c_str(), r.min_gap, r.violations,
                     r.infeasible ? 1 : 0);
    }
    std::fclose(f);
}

void write_monthly_csv(const std::string& path, const std::vector<MonthlyRow>& monthly) {
    FILE* f = open_for_write(path);
    std::fputs("policy,user,month,metric,min,q1,median,q3,max\n", f);
    for (const MonthlyRow& r : monthly) {
        const std::string user = r.user < 0 ? "all" : std::to_string(r.user);
        std::fprintf(f, "%s,%s,%d,%s,%s,%s,%s,%s,%s\n", policy_name(r.policy), user.c_str(),
                     r.month, r.metric.c_str(), fmt_double(r.min).c_str(),
                     fmt_double(r.q1).c_str(), fmt_double(r.median).c_str(),
                     fmt_double(r.q3).c_str(), fmt_double(r.max).c_str());
    }
    std::fclose(f);
}

void write_histogram_csv(const std::string& path, const std::vector<ViolationBucket>& histogram) {
    FILE* f = open_for_write(path);
    std::fputs("policy,violations_per_day,day_count\n", f);
    for (const ViolationBucket& b : histogram) {
        std::fprintf(f, "%s,%d,%d\n", policy_name(b.policy), b.violations_per_day, b.day_count);
    }
    std::fclose(f);
}

} // namespace adaem
