#include "adaem/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "adaem/csv.hpp"
#include "adaem/errors.hpp"
#include "adaem/rng.hpp"

namespace adaem {

FeatureVector build_features(const HarvestTrace& history, const ActivitySchedule& schedule, int t,
                             const FeatureLayout& layout) {
    if (t < 0) throw std::invalid_argument("build_features: t must be non-negative");

    FeatureVector fv;
    fv.values.assign(static_cast<std::size_t>(layout.dim()), 0.0);
    fv.missing.assign(fv.values.size(), false);

    const int available = std::min<int>(t, static_cast<int>(history.values_j.size()));
    auto read_history = [&](int idx, int slot) {
        if (idx >= 0 && idx < available) {
            fv.values[static_cast<std::size_t>(slot)] = history.values_j[static_cast<std::size_t>(idx)];
        } else {
            fv.missing[static_cast<std::size_t>(slot)] = true;
            fv.cold_start = true;
        }
    };

    for (int i = 0; i < layout.recent; ++i) {
        read_history(t - 1 - i, i);
    }
    const int per_day = schedule.intervals_per_day;
    for (int d = 0; d < layout.prev_days; ++d) {
        read_history(t - (d + 1) * per_day, layout.recent + d);
    }

    const int dslot = layout.derivative_slot();
    if (t - 1 >= 0 && t - 1 < available && t - 2 >= 0 && t - 2 < available) {
        fv.values[static_cast<std::size_t>(dslot)] =
            history.values_j[static_cast<std::size_t>(t - 1)]
            - history.values_j[static_cast<std::size_t>(t - 2)];
    } else {
        fv.missing[static_cast<std::size_t>(dslot)] = true;
        fv.cold_start = true;
    }

    if (t < static_cast<int>(schedule.labels.size())) {
        const auto label = schedule.labels[static_cast<std::size_t>(t)];
        fv.values[static_cast<std::size_t>(layout.activity_slot() + static_cast<int>(label))] = 1.0;
        fv.values[static_cast<std::size_t>(layout.location_slot())] =
            schedule.outdoor[static_cast<std::size_t>(t)] ? 1.0 : 0.0;
        const int day = t / per_day;
        fv.values[static_cast<std::size_t>(layout.daytype_slot())] =
            schedule.weekend[static_cast<std::size_t>(day)] ? 1.0 : 0.0;
    }
    return fv;
}

TrainingSet make_training_rows(const HarvestTrace& trace, const ActivitySchedule& schedule,
                               const FeatureLayout& layout) {
    if (trace.values_j.size() != schedule.labels.size()) {
        throw std::invalid_argument("make_training_rows: trace and schedule lengths differ");
    }
    TrainingSet set;
    const int start = layout.prev_days * schedule.intervals_per_day;
    for (int t = start; t < static_cast<int>(trace.values_j.size()); ++t) {
        set.features.push_back(build_features(trace, schedule, t, layout));
        set.targets_j.push_back(trace.values_j[static_cast<std::size_t>(t)]);
    }
    return set;
}

double RegressionTree::eval(const std::vector<double>& x) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const TreeNode& n = nodes[static_cast<std::size_t>(node)];
        node = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
}

namespace {

struct Matrix {
    const std::vector<FeatureVector>* rows;
    double at(std::size_t r, int c) const {
        return (*rows)[r].values[static_cast<std::size_t>(c)];
    }
};

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double score = std::numeric_limits<double>::infinity();
};

// Greedy variance-reduction split: minimize the summed SSE of the two sides.
// Candidate thresholds are midpoints between consecutive distinct values, so
// ties in feature values always land on one side together. Ties in score are
// resolved by scanning features and thresholds in ascending order.
SplitChoice best_split(const Matrix& X, const std::vector<double>& y,
                       const std::vector<int>& indices, int dim, int min_leaf) {
    SplitChoice best;
    const int n = static_cast<int>(indices.size());
    std::vector<std::pair<double, double>> column(static_cast<std::size_t>(n));

    for (int f = 0; f < dim; ++f) {
        for (int i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(indices[static_cast<std::size_t>(i)]);
            column[static_cast<std::size_t>(i)] = {X.at(idx, f), y[idx]};
        }
        std::sort(column.begin(), column.end());

        double sum_left = 0.0, sumsq_left = 0.0;
        double sum_total = 0.0, sumsq_total = 0.0;
        for (const auto& [xv, yv] : column) {
            sum_total += yv;
            sumsq_total += yv * yv;
        }
        for (int i = 0; i < n - 1; ++i) {
            const double yv = column[static_cast<std::size_t>(i)].second;
            sum_left += yv;
            sumsq_left += yv * yv;
            const int n_left = i + 1;
            const int n_right = n - n_left;
            if (column[static_cast<std::size_t>(i)].first
                == column[static_cast<std::size_t>(i + 1)].first) {
                continue; // not a boundary between distinct values
            }
            if (n_left < min_leaf || n_right < min_leaf) continue;
            const double sum_right = sum_total - sum_left;
            const double sumsq_right = sumsq_total - sumsq_left;
            const double score = (sumsq_left - sum_left * sum_left / n_left)
                                 + (sumsq_right - sum_right * sum_right / n_right);
            if (score < best.score) {
                best.found = true;
                best.feature = f;
                best.threshold = (column[static_cast<std::size_t>(i)].first
                                  + column[static_cast<std::size_t>(i + 1)].first) / 2.0;
                best.score = score;
            }
        }
    }
    return best;
}

int grow(RegressionTree& tree, const Matrix& X, const std::vector<double>& y,
         std::vector<int>& indices, int depth, const EnsembleParams& params, int dim) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    double sum = 0.0, sumsq = 0.0;
    for (int idx : indices) {
        sum += y[static_cast<std::size_t>(idx)];
        sumsq += y[static_cast<std::size_t>(idx)] * y[static_cast<std::size_t>(idx)];
    }
    const double n = static_cast<double>(indices.size());
    const double mean = sum / n;
    const double sse = sumsq - sum * sum / n;

    SplitChoice split;
    if (depth < params.max_depth && static_cast<int>(indices.size()) >= 2 * params.min_samples_leaf
        && sse > 1e-12) {
        split = best_split(X, y, indices, dim, params.min_samples_leaf);
    }
    if (!split.found) {
        tree.nodes[static_cast<std::size_t>(node_id)].value = mean;
        return node_id;
    }

    std::vector<int> left_idx, right_idx;
    left_idx.reserve(indices.size());
    right_idx.reserve(indices.size());
    for (int idx : indices) {
        if (X.at(static_cast<std::size_t>(idx), split.feature) < split.threshold) {
            left_idx.push_back(idx);
        } else {
            right_idx.push_back(idx);
        }
    }
    indices.clear();
    indices.shrink_to_fit();

    const int left = grow(tree, X, y, left_idx, depth + 1, params, dim);
    const int right = grow(tree, X, y, right_idx, depth + 1, params, dim);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return node_id;
}

} // namespace

TreeEnsemble fit(const TrainingSet& dataset, const EnsembleParams& params,
                 const FeatureLayout& layout) {
    const std::size_t n = dataset.features.size();
    if (n == 0 || dataset.targets_j.size() != n) {
        throw std::invalid_argument("fit: dataset is empty or misaligned");
    }
    if (params.n_trees < 1 || params.max_depth < 0 || params.min_samples_leaf < 1) {
        throw ConfigError("fit: invalid ensemble hyperparameters");
    }
    const int dim = layout.dim();
    for (const FeatureVector& fv : dataset.features) {
        if (static_cast<int>(fv.values.size()) != dim) {
            throw std::invalid_argument("fit: feature dimension mismatch");
        }
    }
    for (double target : dataset.targets_j) {
        if (target < 0.0) throw std::invalid_argument("fit: targets must be non-negative");
    }

    TreeEnsemble model;
    model.feature_dim = dim;
    model.layout = layout;
    model.params = params;
    model.feature_means.assign(static_cast<std::size_t>(dim), 0.0);
    for (const FeatureVector& fv : dataset.features) {
        for (int c = 0; c < dim; ++c) {
            model.feature_means[static_cast<std::size_t>(c)] += fv.values[static_cast<std::size_t>(c)];
        }
    }
    for (double& m : model.feature_means) m /= static_cast<double>(n);

    const Matrix X{&dataset.features};
    model.trees.reserve(static_cast<std::size_t>(params.n_trees));
    for (int tree_i = 0; tree_i < params.n_trees; ++tree_i) {
        std::mt19937_64 rng = make_rng(params.seed, static_cast<std::uint64_t>(tree_i));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<int> indices(n);
        for (std::size_t i = 0; i < n; ++i) indices[i] = static_cast<int>(pick(rng));

        RegressionTree tree;
        grow(tree, X, dataset.targets_j, indices, 0, params, dim);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

Forecast predict(const TreeEnsemble& model, const FeatureVector& features) {
    if (static_cast<int>(features.values.size()) != model.feature_dim) {
        throw std::invalid_argument("predict: feature dimension mismatch");
    }
    if (model.trees.empty()) {
        throw std::invalid_argument("predict: model has no trees");
    }
    double sum = 0.0;
    std::vector<double> outputs;
    outputs.reserve(model.trees.size());
    for (const RegressionTree& tree : model.trees) {
        outputs.push_back(tree.eval(features.values));
        sum += outputs.back();
    }
    const double raw_mean = sum / static_cast<double>(outputs.size());
    double var = 0.0;
    for (double o : outputs) var += (o - raw_mean) * (o - raw_mean);
    var /= static_cast<double>(outputs.size());

    Forecast forecast;
    forecast.mean_j = std::max(0.0, raw_mean);
    forecast.variance_j2 = var;
    return forecast;
}

double worst_case(const Forecast& forecast, double k) {
    if (k < 0.0) throw std::invalid_argument("worst_case: k must be non-negative");
    return std::max(0.0, forecast.mean_j - k * std::sqrt(forecast.variance_j2));
}

void fill_missing_with_training_means(FeatureVector& features, const TreeEnsemble& model) {
    if (static_cast<int>(features.values.size()) != model.feature_dim) {
        throw std::invalid_argument("fill_missing_with_training_means: dimension mismatch");
    }
    if (!features.cold_start) return;
    for (std::size_t i = 0; i < features.values.size(); ++i) {
        if (features.missing[i]) features.values[i] = model.feature_means[i];
    }
}

// ---------------------------------------------------------------------------
// Serialization. Plain text, one record per line, hexadecimal floats so that
// a saved model predicts bit-identically after loading.
// ---------------------------------------------------------------------------

namespace {
constexpr const char* kModelMagic = "adaem_tree_ensemble";
constexpr int kModelVersion = 1;
} // namespace

HoldoutReport holdout_evaluate(const std::vector<TrainingSet>& per_user_rows,
                               const EnsembleParams& params, double train_fraction) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw ConfigError("train_fraction must lie strictly between 0 and 1");
    }
    TrainingSet train;
    TrainingSet test;
    for (const TrainingSet& rows : per_user_rows) {
        const std::size_t n = rows.features.size();
        const std::size_t cut = static_cast<std::size_t>(static_cast<double>(n) * train_fraction);
        for (std::size_t i = 0; i < n; ++i) {
            TrainingSet& dst = i < cut ? train : test;
            dst.features.push_back(rows.features[i]);
            dst.targets_j.push_back(rows.targets_j[i]);
        }
    }
    if (train.features.empty() || test.features.empty()) {
        throw ConfigError("not enough rows for a train/test split");
    }

    HoldoutReport report;
    report.train_rows = train.features.size();
    report.test_rows = test.features.size();
    report.model = fit(train, params);

    double model_abs = 0.0;
    double persistence_abs = 0.0;
    for (std::size_t i = 0; i < test.features.size(); ++i) {
        const double actual = test.targets_j[i];
        model_abs += std::abs(predict(report.model, test.features[i]).mean_j - actual);
        persistence_abs += std::abs(test.features[i].values[0] - actual);
    }
    report.model_mae = model_abs / static_cast<double>(report.test_rows);
    report.persistence_mae = persistence_abs / static_cast<double>(report.test_rows);
    return report;
}

void save_model(const std::string& path, const TreeEnsemble& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << kModelMagic << ' ' << kModelVersion << '\n';
    out << "feature_dim " << model.feature_dim << '\n';
    out << "recent " << model.layout.recent << '\n';
    out << "prev_days " << model.layout.prev_days << '\n';
    out << "n_trees " << model.params.n_trees << '\n';
    out << "max_depth " << model.params.max_depth << '\n';
    out << "min_samples_leaf " << model.params.min_samples_leaf << '\n';
    out << "seed " << model.params.seed << '\n';
    out << "feature_means";
    for (double m : model.feature_means) out << ' ' << fmt_double_exact(m);
    out << '\n';
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        const auto& nodes = model.trees[t].nodes;
        out << "tree " << t << ' ' << nodes.size() << '\n';
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const TreeNode& n = nodes[i];
            out << i << ' ' << n.feature << ' ' << fmt_double_exact(n.threshold) << ' '
                << n.left << ' ' << n.right << ' ' << fmt_double_exact(n.value) << '\n';
        }
    }
}

namespace {

class TokenReader {
public:
    explicit TokenReader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw ParseError("cannot open '" + path + "'");
    }

    std::string next(const std::string& what) {
        std::string token;
        if (!(in_ >> token)) {
            throw ParseError(path_ + ": unexpected end of file, expected " + what);
        }
        return token;
    }

    void expect(const std::string& literal) {
        const std::string token = next("'" + literal + "'");
        if (token != literal) {
            throw ParseError(path_ + ": expected '" + literal + "', got '" + token + "'");
        }
    }

    long long integer(const std::string& what) { return parse_int(next(what), path_ + ": " + what); }
    double real(const std::string& what) { return parse_double_exact(next(what), path_ + ": " + what); }

private:
    std::string path_;
    std::ifstream in_;
};

} // namespace

TreeEnsemble load_model(const std::string& path) {
    TokenReader reader(path);
    reader.expect(kModelMagic);
    const long long version = reader.integer("version");
    if (version != kModelVersion) {
        throw ParseError(path + ": unsupported model version " + std::to_string(version));
    }

    TreeEnsemble model;
    reader.expect("feature_dim");
    model.feature_dim = static_cast<int>(reader.integer("feature_dim"));
    reader.expect("recent");
    model.layout.recent = static_cast<int>(reader.integer("recent"));
    reader.expect("prev_days");
    model.layout.prev_days = static_cast<int>(reader.integer("prev_days"));
    reader.expect("n_trees");
    model.params.n_trees = static_cast<int>(reader.integer("n_trees"));
    reader.expect("max_depth");
    model.params.max_depth = static_cast<int>(reader.integer("max_depth"));
    reader.expect("min_samples_leaf");
    model.params.min_samples_leaf = static_cast<int>(reader.integer("min_samples_leaf"));
    reader.expect("seed");
    model.params.seed = static_cast<std::uint64_t>(reader.integer("seed"));
    if (model.feature_dim != model.layout.dim()) {
        throw ParseError(path + ": feature_dim does not match the layout");
    }
    if (model.params.n_trees < 1) {
        throw ParseError(path + ": model must contain at least one tree");
    }

    reader.expect("feature_means");
    model.feature_means.resize(static_cast<std::size_t>(model.feature_dim));
    for (double& m : model.feature_means) m = reader.real("feature mean");

    model.trees.resize(static_cast<std::size_t>(model.params.n_trees));
    for (int t = 0; t < model.params.n_trees; ++t) {
        reader.expect("tree");
        if (reader.integer("tree index") != t) {
            throw ParseError(path + ": tree records out of order");
        }
        const long long count = reader.integer("node count");
        if (count < 1) throw ParseError(path + ": tree with no nodes");
        auto& nodes = model.trees[static_cast<std::size_t>(t)].nodes;
        nodes.resize(static_cast<std::size_t>(count));
        for (long long i = 0; i < count; ++i) {
            if (reader.integer("node index") != i) {
                throw ParseError(path + ": node records out of order");
            }
            TreeNode& n = nodes[static_cast<std::size_t>(i)];
            n.feature = static_cast<int>(reader.integer("feature"));
            n.threshold = reader.real("threshold");
            n.left = static_cast<int>(reader.integer("left"));
            n.right = static_cast<int>(reader.integer("right"));
            n.value = reader.real("value");
            if (n.feature >= model.feature_dim) {
                throw ParseError(path + ": node feature out of range");
            }
            if (n.feature >= 0 && (n.left < 0 || n.left >= count || n.right < 0 || n.right >= count)) {
                throw ParseError(path + ": node child out of range");
            }
        }
    }
    return model;
}

} // namespace adaem
