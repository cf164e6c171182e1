#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ufatd/formats.hpp"
#include "ufatd/image.hpp"
#include "ufatd/polyline.hpp"
#include "ufatd/rng.hpp"

namespace ufatd {

/// Synthetic two-rail scene. Perspective classes differ by horizon height:
/// a higher class puts the horizon lower, showing more ground.
struct SceneSpec {
    int W = 320;
    int H = 160;
    int n_classes = 3;
    double gauge_bottom = 160.0;   // rail separation at the bottom row
    double gauge_jitter = 6.0;     // per-rail bottom offset bound
    double curvature_range = 30.0; // max lateral bend at the horizon
    double noise_sigma = 6.0;
    double line_width = 6.0;       // rail width at the bottom row
    std::uint64_t seed = 7;
};

void validate(const SceneSpec& spec);

struct Sample {
    Raster image;
    std::vector<Polyline> tracks;  // 0 = left rail, 1 = right rail
    int perspective_class = 0;
    double horizon = 0.0;
};

/// Horizon row drawn from [0.10H + c*d, 0.10H + (c+1)*d) with d = 0.50H / n_classes.
double horizon_for_class(int c, int n_classes, int H, Rng& rng);

/// Rail geometry only (no raster); what render() draws.
struct RailScene {
    double vanish_x = 0.0;
    double horizon = 0.0;
    double bottom_left = 0.0;
    double bottom_right = 0.0;
    double bend = 0.0;

    /// x of a rail (0 left, 1 right) at row y >= horizon.
    double rail_x(int rail, double y, int H) const;
};

Sample render(const SceneSpec& spec, int perspective_class, Rng& rng);

struct DatasetSplit {
    double val_fraction = 0.15;  // of the pool left after the test split
    double test_fraction = 0.0;  // of the whole count
};

struct DatasetCounts {
    int train = 0, val = 0, test = 0;
};

DatasetCounts split_counts(int count, const DatasetSplit& split);

/// Sample i gets class i mod n_classes and its own RNG stream, so the output is
/// a pure function of (spec, count, split). Writes images/, labels/ and
/// train.txt / val.txt / test.txt under `root`.
DatasetCounts generate_dataset(const SceneSpec& spec, int count, const DatasetSplit& split,
                               const std::filesystem::path& root);

}  // namespace ufatd
