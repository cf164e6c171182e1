#include "ufatd/synth.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ufatd/error.hpp"

namespace ufatd {

void validate(const SceneSpec& spec) {
    if (spec.W <= 0 || spec.H <= 0) fail(ErrorKind::Config, "scene dimensions must be positive");
    if (spec.n_classes < 1) fail(ErrorKind::Config, "synth.n_classes must be >= 1");
    if (!(spec.gauge_bottom > 0.0 && spec.gauge_bottom < spec.W)) fail(ErrorKind::Config, "synth.gauge_bottom must be in (0, W)");
    if (spec.noise_sigma < 0.0) fail(ErrorKind::Config, "synth.noise_sigma must be >= 0");
    if (spec.gauge_jitter < 0.0 || spec.curvature_range < 0.0) fail(ErrorKind::Config, "jitter and curvature must be >= 0");
    if (spec.line_width < 1.0) fail(ErrorKind::Config, "synth.line_width must be >= 1");
}

double horizon_for_class(int c, int n_classes, int H, Rng& rng) {
    if (c < 0 || c >= n_classes) fail(ErrorKind::Index, fmt::format("class {} out of range [0, {})", c, n_classes));
    const double band = 0.50 * H / n_classes;
    const double lo = 0.10 * H + c * band;
    return lo + band * rng.uniform();
}

double RailScene::rail_x(int rail, double y, int H) const {
    const double t = (y - horizon) / (H - horizon);  // 0 at the horizon, 1 at the bottom
    const double bottom = rail == 0 ? bottom_left : bottom_right;
    const double s = 1.0 - t;
    return vanish_x + (bottom - vanish_x) * t + bend * s * s;
}

namespace {

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

std::vector<double> label_rows(double horizon, int H) {
    std::vector<double> rows;
    for (int i = 0;; ++i) {
        const double y = round3(horizon + 2.0 + 2.0 * i);
        if (y >= H - 1) break;
        rows.push_back(y);
    }
    if (rows.empty() || H - 1 - rows.back() > 1e-6) rows.push_back(H - 1);
    return rows;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

Sample render(const SceneSpec& spec, int perspective_class, Rng& rng) {
    validate(spec);
    const int W = spec.W, H = spec.H;
    Sample s;
    s.perspective_class = perspective_class;

    RailScene scene;
    for (;;) {
        scene.vanish_x = rng.uniform(0.3 * W, 0.7 * W);
        scene.horizon = horizon_for_class(perspective_class, spec.n_classes, H, rng);
        scene.bottom_left = scene.vanish_x - spec.gauge_bottom / 2 + rng.uniform(-spec.gauge_jitter, spec.gauge_jitter);
        scene.bottom_right = scene.vanish_x + spec.gauge_bottom / 2 + rng.uniform(-spec.gauge_jitter, spec.gauge_jitter);
        scene.bend = rng.uniform(-spec.curvature_range, spec.curvature_range);
        if (scene.bottom_right - scene.bottom_left <= 0.0) continue;

        s.tracks.clear();
        bool inside = true;
        for (int rail = 0; rail < 2 && inside; ++rail) {
            Polyline p{rail, {}};
            for (double y : label_rows(scene.horizon, H)) {
                const double x = round3(scene.rail_x(rail, y, H));
                if (x < 0.0 || x >= W) inside = false;
                p.vertices.push_back({x, y});
            }
            s.tracks.push_back(std::move(p));
        }
        if (inside) break;
    }
    s.horizon = scene.horizon;

    s.image = Raster(W, H, 1);
    for (int y = 0; y < H; ++y) {
        const double yc = y + 0.5;
        if (yc < scene.horizon) {
            const double sky = 175.0 + 45.0 * (1.0 - yc / scene.horizon);
            for (int x = 0; x < W; ++x) s.image.at(x, y) = to_byte(sky + spec.noise_sigma * rng.normal());
            continue;
        }
        const double t = (yc - scene.horizon) / (H - scene.horizon);
        const double ground = 70.0 + 35.0 * t;
        const double width = 1.0 + (spec.line_width - 1.0) * t;
        const double xl = scene.rail_x(0, yc, H);
        const double xr = scene.rail_x(1, yc, H);
        for (int x = 0; x < W; ++x) {
            const double xc = x + 0.5;
            const double cover = std::clamp(width / 2 + 0.5 - std::min(std::abs(xc - xl), std::abs(xc - xr)), 0.0, 1.0);
            const double v = ground + cover * (225.0 - ground);
            s.image.at(x, y) = to_byte(v + spec.noise_sigma * rng.normal());
        }
    }
    return s;
}

DatasetCounts split_counts(int count, const DatasetSplit& split) {
    if (!(split.val_fraction >= 0.0 && split.val_fraction < 1.0 && split.test_fraction >= 0.0 &&
          split.test_fraction < 1.0)) {
        fail(ErrorKind::Config, "split fractions must lie in [0, 1)");
    }
    DatasetCounts c;
    c.test = static_cast<int>(std::lround(count * split.test_fraction));
    const int pool = count - c.test;
    c.val = static_cast<int>(std::lround(pool * split.val_fraction));
    c.train = pool - c.val;
    return c;
}

DatasetCounts generate_dataset(const SceneSpec& spec, int count, const DatasetSplit& split,
                               const std::filesystem::path& root) {
    validate(spec);
    if (count < spec.n_classes) fail(ErrorKind::Config, "synth.count must be >= synth.n_classes");
    const DatasetCounts counts = split_counts(count, split);

    std::error_code ec;
    std::filesystem::create_directories(root / "images", ec);
    std::filesystem::create_directories(root / "labels", ec);
    if (ec) fail(ErrorKind::Io, "cannot create dataset directory " + root.string() + ": " + ec.message());

    std::vector<IndexEntry> entries(count);
    std::vector<std::string> errors(count);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < count; ++i) {
        try {
            Rng rng = Rng::derive(spec.seed, static_cast<std::uint64_t>(i));
            const int cls = i % spec.n_classes;
            Sample s = render(spec, cls, rng);
            const std::string stem = fmt::format("{:06d}", i);
            entries[i] = {std::filesystem::path("images") / (stem + ".pgm"),
                          std::filesystem::path("labels") / (stem + ".txt"), cls};
            write_pnm(root / entries[i].image, s.image);
            write_labels(root / entries[i].label, s.tracks);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) fail(ErrorKind::Io, e);
    }

    auto slice = [&](int from, int n) {
        return std::vector<IndexEntry>(entries.begin() + from, entries.begin() + from + n);
    };
    write_index(root / "train.txt", slice(0, counts.train));
    write_index(root / "val.txt", slice(counts.train, counts.val));
    write_index(root / "test.txt", slice(counts.train + counts.val, counts.test));
    return counts;
}

}  // namespace ufatd
