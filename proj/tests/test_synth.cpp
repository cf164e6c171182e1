#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <map>

#include "ufatd/error.hpp"
#include "ufatd/fileutil.hpp"
#include "ufatd/formats.hpp"
#include "ufatd/image.hpp"
#include "ufatd/synth.hpp"

using namespace ufatd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ufatd_synth_" + name);
    fs::remove_all(p);
    return p;
}

double separation(const Sample& s, std::size_t v) {
    return s.tracks[1].vertices[v].x - s.tracks[0].vertices[v].x;
}

// The bend is shared by both rails, so their separation is linear in y.
double separation_at(const Sample& s, double y) {
    const std::size_t last = s.tracks[0].vertices.size() - 1;
    const double y0 = s.tracks[0].vertices[0].y, y1 = s.tracks[0].vertices[last].y;
    return separation(s, 0) + (separation(s, last) - separation(s, 0)) * (y - y0) / (y1 - y0);
}

}  // namespace

TEST_CASE("horizon bands") {
    Rng rng(1);
    for (int t = 0; t < 2000; ++t) {
        const double y = horizon_for_class(0, 1, 160, rng);
        CHECK((y >= 16.0 && y < 96.0));
        const double z = horizon_for_class(0, 4, 160, rng);
        CHECK((z >= 16.0 && z < 36.0));
    }
    const int n = 3, H = 160;
    const double band = 0.5 * H / n;
    for (int c = 0; c < n; ++c) {
        for (int t = 0; t < 500; ++t) {
            const double y = horizon_for_class(c, n, H, rng);
            CHECK(y >= 0.1 * H + c * band);
            CHECK(y < 0.1 * H + (c + 1) * band);
        }
    }
    CHECK_THROWS_AS(horizon_for_class(3, 3, 160, rng), Error);
    CHECK_THROWS_AS(horizon_for_class(-1, 3, 160, rng), Error);
}

TEST_CASE("straight rails meet at the vanishing point") {
    SceneSpec spec;
    spec.curvature_range = 0.0;
    spec.gauge_jitter = 0.0;
    for (int seed = 0; seed < 50; ++seed) {
        Rng rng(static_cast<std::uint64_t>(seed));
        const Sample s = render(spec, seed % 3, rng);
        for (const Polyline& p : s.tracks) {
            const Point a = p.vertices.front(), b = p.vertices.back();
            for (const Point& v : p.vertices) {
                const double on_line = a.x + (b.x - a.x) * (v.y - a.y) / (b.y - a.y);
                CHECK(std::abs(v.x - on_line) <= 2e-3);
            }
        }
        // Extrapolate both rails up to the horizon row.
        std::array<double, 2> at_horizon{};
        for (int r = 0; r < 2; ++r) {
            const Point a = s.tracks[r].vertices.front(), b = s.tracks[r].vertices.back();
            at_horizon[r] = a.x + (b.x - a.x) * (s.horizon + 1e-3 - a.y) / (b.y - a.y);
        }
        CHECK(std::abs(at_horizon[1] - at_horizon[0]) <= 2.0);
        CHECK(separation_at(s, spec.H) == doctest::Approx(spec.gauge_bottom).epsilon(1e-4));
    }
}

TEST_CASE("rendered samples respect the scene invariants") {
    const SceneSpec spec;
    const double band = 0.5 * spec.H / spec.n_classes;
    for (int seed = 0; seed < 200; ++seed) {
        Rng rng = Rng::derive(99, static_cast<std::uint64_t>(seed));
        const int cls = seed % spec.n_classes;
        const Sample s = render(spec, cls, rng);
        CHECK(s.perspective_class == cls);
        CHECK(s.horizon >= 0.1 * spec.H + cls * band);
        CHECK(s.horizon < 0.1 * spec.H + (cls + 1) * band);
        REQUIRE(s.tracks.size() == 2);
        for (int r = 0; r < 2; ++r) {
            CHECK(s.tracks[r].track_index == r);
            CHECK_NOTHROW(validate(s.tracks[r], spec.W));
            CHECK(s.tracks[r].vertices.front().y == doctest::Approx(s.horizon + 2.0).epsilon(1e-4));
            CHECK(s.tracks[r].vertices.back().y == spec.H - 1);
        }
        const std::size_t last = s.tracks[0].vertices.size() - 1;
        CHECK(std::abs(separation_at(s, spec.H) - spec.gauge_bottom) <= 2.0 * spec.gauge_jitter + 1e-2);
        for (std::size_t v = 1; v <= last; ++v) CHECK(separation(s, v) >= separation(s, v - 1) - 2e-3);

        double sky = 0.0, ground = 0.0;
        int ns = 0, ng = 0;
        for (int y = 0; y < spec.H; ++y) {
            for (int x = 0; x < spec.W; ++x) {
                if (y + 1 < s.horizon) sky += s.image.at(x, y), ++ns;
                else if (y > s.horizon + 1) ground += s.image.at(x, y), ++ng;
            }
        }
        CHECK(sky / ns > ground / ng);
    }
}

TEST_CASE("rendering is deterministic for a seed") {
    const SceneSpec spec;
    Rng a(42), b(42), c(43);
    const Sample sa = render(spec, 1, a), sb = render(spec, 1, b), sc = render(spec, 1, c);
    CHECK(sa.image.pixels == sb.image.pixels);
    CHECK(sa.tracks == sb.tracks);
    CHECK_FALSE(sa.image.pixels == sc.image.pixels);
}

TEST_CASE("split counts") {
    const DatasetCounts c = split_counts(200, DatasetSplit{0.15, 0.0});
    CHECK(c.train == 170);
    CHECK(c.val == 30);
    CHECK(c.test == 0);
    const DatasetCounts d = split_counts(900, DatasetSplit{0.1428571, 0.2222222});
    CHECK(d.train == 600);
    CHECK(d.val == 100);
    CHECK(d.test == 200);
    CHECK_THROWS_AS(split_counts(100, DatasetSplit{1.0, 0.0}), Error);
}

TEST_CASE("dataset generation") {
    SceneSpec spec;
    spec.seed = 5;
    const fs::path a = scratch("a"), b = scratch("b");
    const DatasetCounts counts = generate_dataset(spec, 300, DatasetSplit{0.15, 0.2}, a);
    generate_dataset(spec, 300, DatasetSplit{0.15, 0.2}, b);
    CHECK(counts.train + counts.val + counts.test == 300);

    std::map<int, int> all;
    for (const char* split : {"train.txt", "val.txt", "test.txt"}) {
        CHECK(read_text(a / split) == read_text(b / split));
        const auto entries = read_index(a / split);
        std::map<int, int> hist;
        for (const IndexEntry& e : entries) {
            ++hist[e.perspective_class];
            ++all[e.perspective_class];
            CHECK(read_bytes(e.image) == read_bytes(b / fs::relative(e.image, a)));
            CHECK(read_labels(e.label) == read_labels(b / fs::relative(e.label, a)));
            const Raster img = read_pnm(e.image);
            CHECK(img.width == spec.W);
            CHECK(img.height == spec.H);
        }
        for (int c = 0; c < spec.n_classes; ++c) {
            CHECK(std::abs(hist[c] * spec.n_classes - static_cast<int>(entries.size())) <= spec.n_classes);
        }
    }
    for (int c = 0; c < 3; ++c) CHECK(all[c] == 100);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("dataset generation errors") {
    CHECK_THROWS_AS(generate_dataset(SceneSpec{}, 2, DatasetSplit{}, scratch("few")), Error);
    try {
        generate_dataset(SceneSpec{}, 3, DatasetSplit{}, "/proc/ufatd_cannot_write");
        FAIL("expected an I/O error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Io);
    }
    SceneSpec bad;
    bad.gauge_bottom = 400.0;
    CHECK_THROWS_AS(validate(bad), Error);
    bad = {};
    bad.noise_sigma = -1.0;
    CHECK_THROWS_AS(validate(bad), Error);
}
