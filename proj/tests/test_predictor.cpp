#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "adaem/errors.hpp"
#include "adaem/harvest.hpp"
#include "adaem/predictor.hpp"

using namespace adaem;

namespace {

ActivitySchedule flat_schedule(int days, ActivityLabel label = ActivityLabel::Other) {
    ActivitySchedule s;
    s.intervals_per_day = 24;
    s.labels.assign(static_cast<std::size_t>(days) * 24, label);
    s.outdoor.assign(s.labels.size(), false);
    s.weekend.assign(static_cast<std::size_t>(days), false);
    return s;
}

RegressionTree leaf_tree(double value) {
    RegressionTree t;
    t.nodes.push_back(TreeNode{-1, 0.0, -1, -1, value});
    return t;
}

TreeEnsemble leaf_ensemble(const std::vector<double>& leaf_values) {
    TreeEnsemble model;
    model.feature_dim = FeatureLayout{}.dim();
    model.params.n_trees = static_cast<int>(leaf_values.size());
    model.feature_means.assign(static_cast<std::size_t>(model.feature_dim), 0.0);
    for (double v : leaf_values) model.trees.push_back(leaf_tree(v));
    return model;
}

FeatureVector zero_features() {
    FeatureVector fv;
    fv.values.assign(static_cast<std::size_t>(FeatureLayout{}.dim()), 0.0);
    fv.missing.assign(fv.values.size(), false);
    return fv;
}

HarvestTrace synthetic_trace(std::uint64_t seed, int days, const ActivitySchedule& schedule) {
    ClimateConfig climate;
    const IrradianceSeries irr = generate_irradiance(seed, days, climate);
    const HarvestTrace pv = pv_trace(irr, PvPanelConfig{});
    const HarvestTrace motion = motion_trace(schedule, 13e-6);
    return combine_harvest(pv, motion);
}

} // namespace

TEST_CASE("feature rows follow the documented layout") {
    const FeatureLayout layout;

    SUBCASE("short history cold-starts the previous-day slots") {
        HarvestTrace history{{2.0, 4.0, 6.0}, 3600.0, 0};
        ActivitySchedule schedule = flat_schedule(1);
        schedule.outdoor[3] = true;
        const FeatureVector fv = build_features(history, schedule, 3, layout);
        REQUIRE(static_cast<int>(fv.values.size()) == layout.dim());
        CHECK(fv.values[0] == 6.0);
        CHECK(fv.values[1] == 4.0);
        CHECK(fv.values[2] == 2.0);
        CHECK(fv.values[3] == 0.0); // one day back, unavailable
        CHECK(fv.values[4] == 0.0); // two days back, unavailable
        CHECK(fv.missing[3]);
        CHECK(fv.missing[4]);
        CHECK(fv.values[static_cast<std::size_t>(layout.derivative_slot())] == doctest::Approx(2.0));
        const int as = layout.activity_slot();
        CHECK(fv.values[static_cast<std::size_t>(as + static_cast<int>(ActivityLabel::Other))] == 1.0);
        CHECK(fv.values[static_cast<std::size_t>(as + static_cast<int>(ActivityLabel::Sleep))] == 0.0);
        CHECK(fv.values[static_cast<std::size_t>(layout.location_slot())] == 1.0);
        CHECK(fv.values[static_cast<std::size_t>(layout.daytype_slot())] == 0.0);
        CHECK(fv.cold_start);
    }
    SUBCASE("empty history zeroes every history slot") {
        HarvestTrace history{{}, 3600.0, 0};
        const ActivitySchedule schedule = flat_schedule(1);
        const FeatureVector fv = build_features(history, schedule, 0, layout);
        for (int i = 0; i <= layout.derivative_slot(); ++i) {
            CHECK(fv.values[static_cast<std::size_t>(i)] == 0.0);
            CHECK(fv.missing[static_cast<std::size_t>(i)]);
        }
        CHECK(fv.cold_start);
    }
    SUBCASE("previous-day slots index one and two days back") {
        HarvestTrace history;
        for (int i = 0; i < 72; ++i) history.values_j.push_back(static_cast<double>(i));
        const ActivitySchedule schedule = flat_schedule(3);
        const FeatureVector fv = build_features(history, schedule, 49, layout);
        CHECK(fv.values[0] == 48.0);
        CHECK(fv.values[1] == 47.0);
        CHECK(fv.values[2] == 46.0);
        CHECK(fv.values[3] == 25.0); // t - 24
        CHECK(fv.values[4] == 1.0);  // t - 48
        CHECK(fv.values[static_cast<std::size_t>(layout.derivative_slot())] == doctest::Approx(1.0));
        CHECK_FALSE(fv.cold_start);
    }
}

TEST_CASE("fitting degenerate datasets") {
    const FeatureLayout layout;
    EnsembleParams params;
    params.n_trees = 5;

    SUBCASE("constant targets give a constant, certain prediction") {
        TrainingSet set;
        for (int i = 0; i < 30; ++i) {
            FeatureVector fv = zero_features();
            fv.values[0] = static_cast<double>(i);
            set.features.push_back(fv);
            set.targets_j.push_back(5.0);
        }
        const TreeEnsemble model = fit(set, params, layout);
        FeatureVector probe = zero_features();
        probe.values[0] = 11.5;
        const Forecast f = predict(model, probe);
        CHECK(f.mean_j == doctest::Approx(5.0));
        CHECK(f.variance_j2 == doctest::Approx(0.0));
    }
    SUBCASE("single sample collapses every tree to one leaf") {
        TrainingSet set;
        set.features.push_back(zero_features());
        set.targets_j.push_back(2.5);
        const TreeEnsemble model = fit(set, params, layout);
        for (const RegressionTree& tree : model.trees) {
            REQUIRE(tree.nodes.size() == 1);
            CHECK(tree.nodes[0].feature == -1);
            CHECK(tree.nodes[0].value == doctest::Approx(2.5));
        }
    }
    SUBCASE("a cleanly separable feature is found") {
        TrainingSet set;
        for (int i = 0; i < 40; ++i) {
            FeatureVector fv = zero_features();
            fv.values[2] = i < 20 ? -1.0 : 1.0;
            set.features.push_back(fv);
            set.targets_j.push_back(i < 20 ? 0.0 : 10.0);
        }
        const TreeEnsemble model = fit(set, params, layout);
        double mae = 0.0;
        for (std::size_t i = 0; i < set.features.size(); ++i) {
            mae += std::abs(predict(model, set.features[i]).mean_j - set.targets_j[i]);
        }
        mae /= static_cast<double>(set.features.size());
        CHECK(mae < 1.0);
    }
    SUBCASE("empty and invalid datasets are rejected") {
        TrainingSet empty;
        CHECK_THROWS_AS(fit(empty, params, layout), std::invalid_argument);

        TrainingSet negative;
        negative.features.push_back(zero_features());
        negative.targets_j.push_back(-1.0);
        CHECK_THROWS_AS(fit(negative, params, layout), std::invalid_argument);
    }
}

TEST_CASE("prediction aggregates tree outputs") {
    SUBCASE("identical trees have zero spread") {
        const TreeEnsemble model = leaf_ensemble({3.0, 3.0, 3.0});
        const Forecast f = predict(model, zero_features());
        CHECK(f.mean_j == doctest::Approx(3.0));
        CHECK(f.variance_j2 == doctest::Approx(0.0));
    }
    SUBCASE("two trees at 2 and 4 give mean 3, variance 1") {
        const Forecast f = predict(leaf_ensemble({2.0, 4.0}), zero_features());
        CHECK(f.mean_j == doctest::Approx(3.0));
        CHECK(f.variance_j2 == doctest::Approx(1.0));
    }
    SUBCASE("negative raw means clamp to zero") {
        const Forecast f = predict(leaf_ensemble({-2.0, -4.0}), zero_features());
        CHECK(f.mean_j == 0.0);
        CHECK(f.variance_j2 == doctest::Approx(1.0));
    }
    SUBCASE("dimension mismatch is rejected") {
        FeatureVector tiny;
        tiny.values = {1.0};
        tiny.missing = {false};
        CHECK_THROWS_AS(predict(leaf_ensemble({1.0}), tiny), std::invalid_argument);
    }
}

TEST_CASE("worst-case transform") {
    CHECK(worst_case(Forecast{10.0, 4.0}, 1.0) == doctest::Approx(8.0));
    CHECK(worst_case(Forecast{1.0, 9.0}, 1.0) == 0.0);
    CHECK(worst_case(Forecast{7.25, 3.0}, 0.0) == doctest::Approx(7.25));
    CHECK_THROWS_AS(worst_case(Forecast{1.0, 1.0}, -0.1), std::invalid_argument);

    // Non-increasing in k.
    double prev = worst_case(Forecast{10.0, 4.0}, 0.0);
    for (int i = 1; i <= 20; ++i) {
        const double w = worst_case(Forecast{10.0, 4.0}, i * 0.5);
        CHECK(w <= prev);
        CHECK(w >= 0.0);
        prev = w;
    }
}

TEST_CASE("fitting is deterministic in the seed") {
    const ActivitySchedule schedule = flat_schedule(10);
    const HarvestTrace trace = synthetic_trace(21, 10, schedule);
    const TrainingSet set = make_training_rows(trace, schedule);
    REQUIRE(set.features.size() == 10u * 24u - 48u);

    EnsembleParams params;
    params.seed = 99;
    const TreeEnsemble a = fit(set, params);
    const TreeEnsemble b = fit(set, params);
    params.seed = 100;
    const TreeEnsemble c = fit(set, params);

    bool any_differs = false;
    for (std::size_t i = 0; i < set.features.size(); i += 7) {
        const Forecast fa = predict(a, set.features[i]);
        const Forecast fb = predict(b, set.features[i]);
        CHECK(fa.mean_j == fb.mean_j);
        CHECK(fa.variance_j2 == fb.variance_j2);
        if (predict(c, set.features[i]).mean_j != fa.mean_j) any_differs = true;
    }
    CHECK(any_differs);
}

TEST_CASE("ensemble beats the persistence forecast on held-out days") {
    const int days = 90;
    ActivityTemplate tmpl;
    const ActivitySchedule schedule = generate_activity_schedule(4, days, tmpl);
    const HarvestTrace trace = synthetic_trace(4, days, schedule);

    // Train on the first 60 days, evaluate one-step-ahead on the rest.
    const FeatureLayout layout;
    TrainingSet train;
    const int split_t = 60 * 24;
    for (int t = layout.prev_days * 24; t < split_t; ++t) {
        train.features.push_back(build_features(trace, schedule, t, layout));
        train.targets_j.push_back(trace.values_j[static_cast<std::size_t>(t)]);
    }
    const TreeEnsemble model = fit(train, EnsembleParams{});

    double mae_model = 0.0, mae_persistence = 0.0;
    int count = 0;
    for (int t = split_t; t < days * 24; ++t) {
        const FeatureVector fv = build_features(trace, schedule, t, layout);
        const double actual = trace.values_j[static_cast<std::size_t>(t)];
        mae_model += std::abs(predict(model, fv).mean_j - actual);
        mae_persistence += std::abs(trace.values_j[static_cast<std::size_t>(t - 24)] - actual);
        ++count;
    }
    mae_model /= count;
    mae_persistence /= count;
    CHECK(mae_model <= mae_persistence);

    SUBCASE("predictions stay non-negative everywhere") {
        for (int t = split_t; t < days * 24; ++t) {
            const FeatureVector fv = build_features(trace, schedule, t, layout);
            CHECK(predict(model, fv).mean_j >= 0.0);
        }
    }
}

TEST_CASE("cold-start slots can be backfilled from training means") {
    const ActivitySchedule schedule = flat_schedule(10);
    const HarvestTrace trace = synthetic_trace(13, 10, schedule);
    const TreeEnsemble model = fit(make_training_rows(trace, schedule), EnsembleParams{});

    HarvestTrace empty{{}, 3600.0, 0};
    FeatureVector fv = build_features(empty, schedule, 0);
    REQUIRE(fv.cold_start);
    fill_missing_with_training_means(fv, model);
    for (std::size_t i = 0; i < fv.values.size(); ++i) {
        if (fv.missing[i]) {
            CHECK(fv.values[i] == model.feature_means[i]);
        }
    }
}

TEST_CASE("model files round-trip bit-exactly") {
    const ActivitySchedule schedule = generate_activity_schedule(8, 20, {});
    const HarvestTrace trace = synthetic_trace(8, 20, schedule);
    const TrainingSet set = make_training_rows(trace, schedule);
    const TreeEnsemble model = fit(set, EnsembleParams{});

    const auto path = (std::filesystem::temp_directory_path() / "adaem_model_rt.txt").string();
    save_model(path, model);
    const TreeEnsemble loaded = load_model(path);

    CHECK(loaded.feature_dim == model.feature_dim);
    CHECK(loaded.params.n_trees == model.params.n_trees);
    CHECK(loaded.feature_means == model.feature_means);
    for (std::size_t i = 0; i < set.features.size(); ++i) {
        const Forecast a = predict(model, set.features[i]);
        const Forecast b = predict(loaded, set.features[i]);
        CHECK(a.mean_j == b.mean_j); // bitwise equality intended
        CHECK(a.variance_j2 == b.variance_j2);
    }
    std::filesystem::remove(path);

    SUBCASE("corrupt files are rejected with context") {
        const auto bad = (std::filesystem::temp_directory_path() / "adaem_model_bad.txt").string();
        std::ofstream out(bad);
        out << "not_a_model 1\n";
        out.close();
        CHECK_THROWS_AS(load_model(bad), ParseError);
        std::filesystem::remove(bad);
        CHECK_THROWS_AS(load_model("/nonexistent/adaem_model.txt"), ParseError);
    }
}
