#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adaem/core.hpp"
#include "adaem/harvest.hpp"

namespace adaem {

// ---------------------------------------------------------------------------
// Feature construction. One row per interval: recent harvests, same-interval
// harvests from previous days, a first difference, and the schedule context.
// ---------------------------------------------------------------------------

struct FeatureLayout {
    int recent = 3;    // harvests at t-1 .. t-recent
    int prev_days = 2; // harvests at t-24, t-48, ...

    int dim() const { return recent + prev_days + 1 + kActivityCount + 2; }
    int derivative_slot() const { return recent + prev_days; }
    int activity_slot() const { return recent + prev_days + 1; }
    int location_slot() const { return activity_slot() + kActivityCount; }
    int daytype_slot() const { return location_slot() + 1; }
};

struct FeatureVector {
    std::vector<double> values;
    // Slots whose history index fell before the start of the trace. They are
    // zero-filled here; callers may substitute training means instead.
    std::vector<bool> missing;
    bool cold_start = false;
};

FeatureVector build_features(const HarvestTrace& history, const ActivitySchedule& schedule, int t,
                             const FeatureLayout& layout = {});

// ---------------------------------------------------------------------------
// Bagged regression trees. Prediction is the mean of the per-tree outputs,
// uncertainty is their spread.
// ---------------------------------------------------------------------------

struct EnsembleParams {
    int n_trees = 20;
    int max_depth = 6;
    int min_samples_leaf = 5;
    std::uint64_t seed = 1;
};

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double eval(const std::vector<double>& x) const;
};

struct TreeEnsemble {
    int feature_dim = 0;
    FeatureLayout layout;
    EnsembleParams params;
    std::vector<RegressionTree> trees;
    // Column means of the training matrix, used to stand in for feature slots
    // that have no history yet (the first days of a simulation).
    std::vector<double> feature_means;
};

struct Forecast {
    double mean_j = 0.0;
    double variance_j2 = 0.0;
};

struct TrainingSet {
    std::vector<FeatureVector> features;
    std::vector<double> targets_j;
};

// Rows for every interval that has a full feature window, i.e. starting at
// prev_days whole days into the trace.
TrainingSet make_training_rows(const HarvestTrace& trace, const ActivitySchedule& schedule,
                               const FeatureLayout& layout = {});

TreeEnsemble fit(const TrainingSet& dataset, const EnsembleParams& params,
                 const FeatureLayout& layout = {});

Forecast predict(const TreeEnsemble& model, const FeatureVector& features);

// Robust lower estimate: mean minus k standard deviations, floored at zero.
double worst_case(const Forecast& forecast, double k);

// Replace zero-filled missing slots with the training means stored in the
// model. No-op for rows with complete history.
void fill_missing_with_training_means(FeatureVector& features, const TreeEnsemble& model);

struct HoldoutReport {
    double model_mae = 0.0;
    double persistence_mae = 0.0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    TreeEnsemble model;
};

// Chronological split per row block: the leading `train_fraction` of each
// user's rows trains a pooled model, the remainder scores it. The persistence
// baseline predicts the previous interval's harvest (the first lag feature).
HoldoutReport holdout_evaluate(const std::vector<TrainingSet>& per_user_rows,
                               const EnsembleParams& params, double train_fraction = 0.8);

// Text format with hexadecimal floats; round-trips bit-exactly.
void save_model(const std::string& path, const TreeEnsemble& model);
TreeEnsemble load_model(const std::string& path);

} // namespace adaem
