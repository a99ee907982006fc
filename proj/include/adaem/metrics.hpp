#pragma once

#include <string>
#include <vector>

#include "adaem/sim.hpp"

namespace adaem {

// One evaluation day flattened for CSV output and aggregation. `violations`
// counts the three per-interval categories (floor, accuracy, critical
// charging); the terminal shortfall is carried in the day's report instead.
struct DailyRecord {
    Policy policy;
    int user = 0;
    int day = 0;
    int month = 0;
    double charging_j = 0.0;
    double savings_j = 0.0;
    double mean_accuracy = 0.0;
    int min_gap = 0;
    int violations = 0;
    bool infeasible = false;
};

// Five-number summary of one quantity over a month of days. user == -1 pools
// every user's days.
struct MonthlyRow {
    Policy policy;
    int user = 0;
    int month = 0;
    std::string metric;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

struct ViolationBucket {
    Policy policy;
    int violations_per_day = 0;
    int day_count = 0;
};

struct MetricTables {
    std::vector<DailyRecord> daily;
    std::vector<MonthlyRow> monthly;
    std::vector<ViolationBucket> histogram;
};

// Linear-interpolation quantile of an ascending-sorted, non-empty sample.
double quantile_sorted(const std::vector<double>& sorted, double q);

MetricTables compute_metrics(const ExperimentResult& result);

void write_daily_csv(const std::string& path, const std::vector<DailyRecord>& daily);
void write_monthly_csv(const std::string& path, const std::vector<MonthlyRow>& monthly);
void write_histogram_csv(const std::string& path, const std::vector<ViolationBucket>& histogram);

} // namespace adaem
