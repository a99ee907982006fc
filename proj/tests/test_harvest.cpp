#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "adaem/errors.hpp"
#include "adaem/harvest.hpp"

using namespace adaem;

namespace {

struct TempFile {
    std::filesystem::path path;

    explicit TempFile(const std::string& name, const std::string& content)
        : path(std::filesystem::temp_directory_path() / name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::filesystem::remove(path); }
};

int count_runs(const ActivitySchedule& schedule, ActivityLabel label, int& longest) {
    int runs = 0;
    longest = 0;
    int current = 0;
    for (ActivityLabel l : schedule.labels) {
        if (l == label) {
            if (current == 0) ++runs;
            ++current;
            longest = std::max(longest, current);
        } else {
            current = 0;
        }
    }
    return runs;
}

} // namespace

TEST_CASE("pv energy is irradiance times area, efficiency and duration") {
    CHECK(pv_energy(500.0, {0.001, 0.10}, 3600.0) == doctest::Approx(180.0));
    CHECK(pv_energy(0.0, {0.001, 0.10}, 3600.0) == 0.0);
    CHECK(pv_energy(800.0, {0.0005, 0.15}, 3600.0) == doctest::Approx(216.0));
    CHECK_THROWS_AS(pv_energy(-1.0, {0.001, 0.10}, 3600.0), std::invalid_argument);

    // Linear in every factor.
    const double base = pv_energy(321.0, {0.001, 0.10}, 3600.0);
    CHECK(pv_energy(642.0, {0.001, 0.10}, 3600.0) == doctest::Approx(2.0 * base));
    CHECK(pv_energy(321.0, {0.002, 0.10}, 3600.0) == doctest::Approx(2.0 * base));
    CHECK(pv_energy(321.0, {0.001, 0.20}, 3600.0) == doctest::Approx(2.0 * base));
    CHECK(pv_energy(321.0, {0.001, 0.10}, 7200.0) == doctest::Approx(2.0 * base));
}

TEST_CASE("motion energy scales with activity intensity") {
    CHECK(motion_energy(ActivityLabel::Exercise, 3600.0, 13e-6) == doctest::Approx(0.0468));
    CHECK(motion_energy(ActivityLabel::Sleep, 3600.0, 13e-6) == 0.0);
    CHECK(motion_energy(ActivityLabel::Other, 3600.0, 13e-6) == doctest::Approx(0.0234));

    MotionIntensities custom;
    custom.work = 0.6;
    CHECK(motion_energy(ActivityLabel::Work, 3600.0, 13e-6, custom)
          == doctest::Approx(0.6 * 13e-6 * 3600.0));
    CHECK_THROWS_AS(motion_energy(ActivityLabel::Work, 3600.0, -1.0), std::invalid_argument);
}

TEST_CASE("irradiance loader parses and aggregates rows") {
    SUBCASE("one row per interval") {
        TempFile f("adaem_irr_direct.csv",
                   "t,ghi\n2020-01-01T12:00,500\n2020-01-01T13:00,300\n");
        const IrradianceSeries s = load_irradiance_csv(f.path.string(), 3600.0);
        REQUIRE(s.values_w_m2.size() == 2);
        CHECK(s.values_w_m2[0] == doctest::Approx(500.0));
        CHECK(s.values_w_m2[1] == doctest::Approx(300.0));
    }
    SUBCASE("sub-interval samples are averaged") {
        TempFile f("adaem_irr_subhour.csv",
                   "timestamp,ghi_w_m2\n"
                   "2020-01-01T12:00:00Z,400\n2020-01-01T12:15:00Z,400\n"
                   "2020-01-01T12:30:00Z,600\n2020-01-01T12:45:00Z,600\n");
        const IrradianceSeries s = load_irradiance_csv(f.path.string(), 3600.0);
        REQUIRE(s.values_w_m2.size() == 1);
        CHECK(s.values_w_m2[0] == doctest::Approx(500.0));
    }
    SUBCASE("empty file is rejected") {
        TempFile f("adaem_irr_empty.csv", "");
        CHECK_THROWS_AS(load_irradiance_csv(f.path.string(), 3600.0), ParseError);
    }
    SUBCASE("header-only file is rejected") {
        TempFile f("adaem_irr_header.csv", "timestamp,ghi_w_m2\n");
        CHECK_THROWS_AS(load_irradiance_csv(f.path.string(), 3600.0), ParseError);
    }
    SUBCASE("non-monotone timestamps are rejected") {
        TempFile f("adaem_irr_order.csv",
                   "t,ghi\n2020-01-01T13:00,300\n2020-01-01T12:00,500\n");
        CHECK_THROWS_AS(load_irradiance_csv(f.path.string(), 3600.0), ParseError);
    }
    SUBCASE("malformed value names the line") {
        TempFile f("adaem_irr_bad.csv", "t,ghi\n2020-01-01T12:00,abc\n");
        try {
            load_irradiance_csv(f.path.string(), 3600.0);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
    SUBCASE("negative irradiance is rejected") {
        TempFile f("adaem_irr_neg.csv", "t,ghi\n2020-01-01T12:00,-5\n");
        CHECK_THROWS_AS(load_irradiance_csv(f.path.string(), 3600.0), ParseError);
    }
}

TEST_CASE("synthetic activity schedule honors its template") {
    ActivityTemplate tmpl;
    tmpl.exercise_intervals = 2;

    const ActivitySchedule one_day = generate_activity_schedule(42, 1, tmpl);
    CHECK(one_day.labels.size() == 24);
    int longest = 0;
    CHECK(count_runs(one_day, ActivityLabel::Exercise, longest) == 1);
    CHECK(longest == 2);

    SUBCASE("deterministic for a fixed seed") {
        const ActivitySchedule again = generate_activity_schedule(42, 1, tmpl);
        CHECK(again.labels == one_day.labels);
        CHECK(again.outdoor == one_day.outdoor);
        CHECK(again.weekend == one_day.weekend);
        const ActivitySchedule other = generate_activity_schedule(43, 1, tmpl);
        CHECK(other.labels != one_day.labels);
    }
    SUBCASE("one label per interval") {
        CHECK(generate_activity_schedule(7, 7, tmpl).labels.size() == 168);
    }
    SUBCASE("every day sleeps 7 to 9 intervals and exercises once") {
        const ActivitySchedule week = generate_activity_schedule(11, 14, tmpl);
        for (int d = 0; d < 14; ++d) {
            int sleep = 0, exercise = 0, work = 0;
            for (int h = 0; h < 24; ++h) {
                switch (week.labels[static_cast<std::size_t>(d * 24 + h)]) {
                    case ActivityLabel::Sleep: ++sleep; break;
                    case ActivityLabel::Exercise: ++exercise; break;
                    case ActivityLabel::Work: ++work; break;
                    default: break;
                }
            }
            CHECK(sleep >= 7);
            CHECK(sleep <= 9);
            CHECK(exercise == tmpl.exercise_intervals);
            if (week.weekend[static_cast<std::size_t>(d)]) {
                CHECK(work == 0);
            } else {
                CHECK(work > 0);
            }
        }
        // Day 0 is a Monday, so days 5 and 6 are the weekend.
        CHECK_FALSE(week.weekend[0]);
        CHECK(week.weekend[5]);
        CHECK(week.weekend[6]);
    }
    SUBCASE("oversized blocks are rejected") {
        ActivityTemplate bad = tmpl;
        bad.exercise_intervals = 12;
        CHECK_THROWS_AS(generate_activity_schedule(1, 1, bad), ConfigError);
    }
}

TEST_CASE("synthetic irradiance follows day and season structure") {
    ClimateConfig climate;
    const IrradianceSeries year = generate_irradiance(5, 365, climate);
    REQUIRE(year.values_w_m2.size() == 365u * 24u);

    SUBCASE("nights are dark and nothing is negative") {
        for (int d = 0; d < 365; ++d) {
            CHECK(year.values_w_m2[static_cast<std::size_t>(d) * 24] == 0.0);
            CHECK(year.values_w_m2[static_cast<std::size_t>(d) * 24 + 23] == 0.0);
        }
        for (double v : year.values_w_m2) CHECK(v >= 0.0);
    }
    SUBCASE("deterministic for a fixed seed") {
        const IrradianceSeries again = generate_irradiance(5, 365, climate);
        CHECK(again.values_w_m2 == year.values_w_m2);
        const IrradianceSeries other = generate_irradiance(6, 365, climate);
        CHECK(other.values_w_m2 != year.values_w_m2);
    }
    SUBCASE("summer month integrates above winter month") {
        auto month_sum = [&](int first_day) {
            const auto begin = year.values_w_m2.begin() + first_day * 24;
            return std::accumulate(begin, begin + 30 * 24, 0.0);
        };
        CHECK(month_sum(172) > month_sum(335)); // late June vs December
        CHECK(month_sum(172) > 2.0 * month_sum(335));
    }
}

TEST_CASE("trace combination is an element-wise sum") {
    HarvestTrace pv{{1.0, 0.5}, 3600.0, 0};
    HarvestTrace motion{{0.1, 0.2}, 3600.0, 0};
    const HarvestTrace combined = combine_harvest(pv, motion);
    REQUIRE(combined.values_j.size() == 2);
    CHECK(combined.values_j[0] == doctest::Approx(1.1));
    CHECK(combined.values_j[1] == doctest::Approx(0.7));

    const HarvestTrace zeros{{0.0, 0.0}, 3600.0, 0};
    CHECK(combine_harvest(pv, zeros).values_j == pv.values_j);

    HarvestTrace shorter{{0.1}, 3600.0, 0};
    CHECK_THROWS_AS(combine_harvest(pv, shorter), std::invalid_argument);
    HarvestTrace coarser{{0.1, 0.2}, 7200.0, 0};
    CHECK_THROWS_AS(combine_harvest(pv, coarser), std::invalid_argument);
}

TEST_CASE("csv writers and loaders agree") {
    const auto dir = std::filesystem::temp_directory_path();

    SUBCASE("irradiance") {
        IrradianceSeries series = generate_irradiance(3, 2, {});
        series.start_epoch_s = 1704067200; // 2024-01-01T00:00:00Z
        const auto path = (dir / "adaem_rt_irr.csv").string();
        write_irradiance_csv(path, series);
        const IrradianceSeries back = load_irradiance_csv(path, 3600.0);
        REQUIRE(back.values_w_m2.size() == series.values_w_m2.size());
        CHECK(back.start_epoch_s == series.start_epoch_s);
        for (std::size_t i = 0; i < back.values_w_m2.size(); ++i) {
            CHECK(back.values_w_m2[i] == doctest::Approx(series.values_w_m2[i]).epsilon(1e-9));
        }
        std::filesystem::remove(path);
    }
    SUBCASE("activity") {
        ActivitySchedule schedule = generate_activity_schedule(9, 3, {});
        schedule.start_epoch_s = 1704067200;
        const auto path = (dir / "adaem_rt_act.csv").string();
        write_activity_csv(path, schedule);
        const ActivitySchedule back = load_activity_csv(path, 3600.0);
        CHECK(back.labels == schedule.labels);
        CHECK(back.outdoor == schedule.outdoor);
        CHECK(back.weekend == schedule.weekend);
        CHECK(back.start_epoch_s == schedule.start_epoch_s);
        std::filesystem::remove(path);
    }
    SUBCASE("harvest trace") {
        HarvestTrace trace{{0.0, 1.25, 3.5}, 3600.0, 0};
        const auto path = (dir / "adaem_rt_harvest.csv").string();
        write_harvest_csv(path, trace);
        const HarvestTrace back = load_harvest_csv(path, 3600.0);
        CHECK(back.values_j == trace.values_j);
        std::filesystem::remove(path);
    }
}
