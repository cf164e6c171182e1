#include <doctest.h>

#include <cmath>
#include <vector>

#include "ufatd/anchors.hpp"
#include "ufatd/error.hpp"

using namespace ufatd;

namespace {

// Straight from the circle-arc definition, written independently of the library.
double arc_oracle(double x) {
    const double u = 1.0 - x;
    return x <= 1.0 ? std::sqrt(1.0 - u * u) : 2.0 - std::sqrt(1.0 - u * u);
}

std::vector<double> cumulative_oracle(int h, double s, double H) {
    std::vector<double> rows;
    const double d = (H - s) / (h - 1);
    double acc = s;
    for (int j = 0; j < h; ++j) {
        acc += d * arc_oracle(2.0 * j / h);
        rows.push_back(acc);
    }
    return rows;
}

Polyline track(double top, double bottom = 150.0, double x = 100.0) { return {0, {{x, top}, {x, bottom}}}; }

}  // namespace

TEST_CASE("scaling factor values") {
    CHECK(scaling_factor(0.0) == 0.0);
    CHECK(scaling_factor(1.0) == 1.0);
    CHECK(scaling_factor(2.0) == 2.0);
    CHECK(scaling_factor(0.5) == doctest::Approx(0.8660254037844386).epsilon(1e-15));
    CHECK(scaling_factor(1.5) == doctest::Approx(1.1339745962155614).epsilon(1e-15));
    CHECK(scaling_factor(0.5) == arc_oracle(0.5));
    CHECK_THROWS_AS(scaling_factor(-0.01), Error);
    CHECK_THROWS_AS(scaling_factor(2.01), Error);
}

TEST_CASE("scaling factor is monotone and point symmetric about 1") {
    double prev = 0.0;
    for (int i = 0; i <= 2000; ++i) {
        const double x = i / 1000.0;
        const double f = scaling_factor(x);
        CHECK(f >= prev);
        prev = f;
    }
    for (int i = 0; i <= 1000; ++i) {
        const double t = i / 1000.0;
        CHECK(std::abs(scaling_factor(1.0 - t) + scaling_factor(1.0 + t) - 2.0) <= 1e-12);
    }
}

TEST_CASE("sum of scaling factors over a group is h-1") {
    for (int h = 2; h <= 64; ++h) {
        double sum = 0.0;
        for (int j = 0; j < h; ++j) sum += scaling_factor(2.0 * j / h);
        CHECK(std::abs(sum - (h - 1)) <= 1e-9 * (h - 1));
    }
}

TEST_CASE("group starts") {
    const AnchorGenSpec spec{12, 3, 100.0, 300.0, 1080.0};
    CHECK(group_start(0, spec) == 100.0);
    CHECK(group_start(1, spec) == 200.0);
    CHECK(group_start(2, spec) == 300.0);
    CHECK_THROWS_AS(group_start(3, spec), Error);
    CHECK_THROWS_AS(group_start(-1, spec), Error);
    CHECK(group_start(0, AnchorGenSpec{12, 1, 40.0, 90.0, 150.0}) == 40.0);

    const AnchorSet set = generate_set(spec);
    REQUIRE(set.groups.size() == 3);
    CHECK(set.groups[0].start == 100.0);
    CHECK(set.groups[1].start == 200.0);
    CHECK(set.groups[2].start == 300.0);
}

TEST_CASE("small groups") {
    const AnchorGenSpec two{2, 1, 10.0, 10.0, 70.0};
    const AnchorGroup g2 = generate_group(0, two);
    REQUIRE(g2.rows.size() == 2);
    CHECK(g2.rows[0] == 10.0);
    CHECK(g2.rows[1] == doctest::Approx(70.0).epsilon(1e-15));

    const AnchorGroup g4 = generate_group(0, AnchorGenSpec{4, 1, 10.0, 10.0, 70.0});
    const auto expect = cumulative_oracle(4, 10.0, 70.0);
    REQUIRE(g4.rows.size() == 4);
    CHECK(g4.rows[1] == doctest::Approx(27.320508075688775).epsilon(1e-14));
    CHECK(g4.rows[2] == doctest::Approx(47.320508075688775).epsilon(1e-14));
    for (int j = 0; j < 4; ++j) CHECK(g4.rows[j] == doctest::Approx(expect[j]).epsilon(1e-14));

    const AnchorGroup eq = generate_equidistant_group(0, AnchorGenSpec{4, 1, 10.0, 10.0, 70.0});
    CHECK(eq.rows == std::vector<double>{10.0, 30.0, 50.0, 70.0});
}

TEST_CASE("group geometry holds for every size") {
    for (int n = 1; n <= 5; ++n) {
        for (int h = 2; h <= 64; ++h) {
            const AnchorGenSpec spec{h, n, 17.5, 96.25, 156.8};
            const AnchorSet set = generate_set(spec);
            const AnchorSet eq = generate_equidistant_set(spec);
            for (int k = 0; k < n; ++k) {
                const auto& rows = set.groups[k].rows;
                const auto oracle = cumulative_oracle(h, group_start(k, spec), spec.h_anchor);
                CHECK(rows.front() == group_start(k, spec));
                CHECK(std::abs(rows.back() - spec.h_anchor) <= 1e-9 * spec.h_anchor);
                double gap = 0.0;
                for (int j = 1; j < h; ++j) {
                    const double d = rows[j] - rows[j - 1];
                    CHECK(d > 0.0);
                    CHECK(d >= gap - 1e-12);
                    gap = d;
                }
                for (int j = 0; j < h; ++j) CHECK(std::abs(rows[j] - oracle[j]) <= 1e-12 * spec.h_anchor);

                const auto& er = eq.groups[k].rows;
                const double step = er[1] - er[0];
                for (int j = 1; j < h; ++j) CHECK(er[j] - er[j - 1] == doctest::Approx(step).epsilon(1e-12));
                CHECK(std::abs(er.back() - spec.h_anchor) <= 1e-9 * spec.h_anchor);
            }
        }
    }
}

TEST_CASE("degenerate extent gives identical groups") {
    const AnchorSet set = generate_set(AnchorGenSpec{12, 3, 50.0, 50.0, 150.0});
    CHECK(set.groups[0].rows == set.groups[1].rows);
    CHECK(set.groups[1].rows == set.groups[2].rows);
}

TEST_CASE("invalid generation specs") {
    CHECK_THROWS_AS(generate_set(AnchorGenSpec{1, 3, 10.0, 20.0, 100.0}), Error);
    CHECK_THROWS_AS(generate_set(AnchorGenSpec{12, 0, 10.0, 20.0, 100.0}), Error);
    CHECK_THROWS_AS(generate_set(AnchorGenSpec{12, 3, 30.0, 20.0, 100.0}), Error);
    CHECK_THROWS_AS(generate_set(AnchorGenSpec{12, 3, 10.0, 120.0, 100.0}), Error);
}

TEST_CASE("reduction ratio") {
    CHECK(reduction_ratio(288, 800, 52, 200, 1) == doctest::Approx(230400.0 / 10452.0));
    CHECK(std::round(reduction_ratio(288, 800, 52, 200, 1)) == 22.0);
    CHECK(std::round(reduction_ratio(288, 800, 18, 200, 2) * 10.0) / 10.0 == doctest::Approx(31.8));
    CHECK(reduction_ratio(10, 41, 2, 40, 5) == doctest::Approx(1.0));
    CHECK(reduction_ratio(288, 800, 18, 200, 2) == reduction_ratio(800, 288, 18, 200, 2));
    CHECK(reduction_ratio(160, 320, 6, 40, 1) == doctest::Approx(4.0 * reduction_ratio(160, 320, 12, 40, 2)));
    CHECK_THROWS_AS(reduction_ratio(0, 800, 18, 200, 2), Error);
    CHECK_THROWS_AS(reduction_ratio(288, 800, 18, 200, -1), Error);
}

TEST_CASE("group assignment from the highest track top") {
    const AnchorSet set = generate_set(AnchorGenSpec{12, 3, 100.0, 300.0, 1080.0});
    const std::vector<Polyline> mid{track(250.0), track(400.0)};
    CHECK(assign_group(mid, set) == 1);
    const std::vector<Polyline> high{track(50.0)};
    CHECK(assign_group(high, set) == 0);
    const std::vector<Polyline> edge{track(300.0)};
    CHECK(assign_group(edge, set) == 2);
    CHECK_THROWS_AS(assign_group(std::vector<Polyline>{}, set), Error);
}

TEST_CASE("top row extent scans every image") {
    const std::vector<std::vector<Polyline>> corpus{{track(40.0), track(55.0)}, {}, {track(90.0)}, {track(70.0)}};
    const TopRowExtent e = top_row_extent(corpus);
    CHECK(e.y_min == 40.0);
    CHECK(e.y_max == 90.0);
    CHECK_THROWS_AS(top_row_extent(std::vector<std::vector<Polyline>>{{}, {}}), Error);
}
