#include "ufatd/codec.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "ufatd/error.hpp"

namespace ufatd {

int x_to_cell(double x, int W, int w) {
    if (!(x >= 0.0 && x < W)) fail(ErrorKind::Domain, fmt::format("x={} outside [0, {})", x, W));
    const int c = static_cast<int>(std::floor(x * w / W));
    return std::clamp(c, 0, w - 1);
}

double cell_to_x(int c, int W, int w) {
    if (c < 0 || c >= w) fail(ErrorKind::Domain, fmt::format("cell {} has no location (grid has {} cells)", c, w));
    return (c + 0.5) * W / w;
}

GridTarget encode(std::span<const Polyline> tracks, const AnchorSet& set, int W, int w, int C) {
    std::set<int> seen;
    for (const auto& t : tracks) {
        if (t.track_index < 0 || t.track_index >= C) {
            fail(ErrorKind::Input, fmt::format("track index {} outside [0, {})", t.track_index, C));
        }
        if (!seen.insert(t.track_index).second) {
            fail(ErrorKind::Input, fmt::format("duplicate track index {}", t.track_index));
        }
    }

    GridTarget target;
    target.n = set.n();
    target.h = set.h();
    target.C = C;
    target.w = w;
    target.cells.assign(static_cast<std::size_t>(target.n) * target.h * C, w);
    for (const auto& g : set.groups) {
        for (int j = 0; j < target.h; ++j) {
            for (const auto& t : tracks) {
                if (auto x = sample_at_row(t, g.rows[j])) {
                    target.at(g.k, j, t.track_index) = x_to_cell(*x, W, w);
                }
            }
        }
    }
    bool any = std::any_of(tracks.begin(), tracks.end(), [](const Polyline& t) { return !t.vertices.empty(); });
    target.gt_group = any ? assign_group(tracks, set) : 0;
    return target;
}

DecodedTracks decode(const Prediction& pred, const AnchorSet& set, int W, int w, DecodeMode mode) {
    if (pred.w != w || pred.h != set.h() || pred.n != set.n()) {
        fail(ErrorKind::Input, "prediction shape does not match the anchor set");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(pred.loc_logits.begin(), pred.loc_logits.end(), finite) ||
        !std::all_of(pred.group_logits.begin(), pred.group_logits.end(), finite)) {
        fail(ErrorKind::Input, "prediction contains non-finite logits");
    }

    DecodedTracks out;
    out.group = static_cast<int>(std::max_element(pred.group_logits.begin(), pred.group_logits.end()) -
                                 pred.group_logits.begin());
    const auto& rows = set.groups[out.group].rows;
    const int k = out.group;

    for (int i = 0; i < pred.C; ++i) {
        Polyline track{i, {}};
        for (int j = 0; j < pred.h; ++j) {
            int best = 0;
            for (int c = 1; c <= w; ++c) {
                if (pred.loc(c, j, i, k) > pred.loc(best, j, i, k)) best = c;
            }
            if (best == w) continue;
            double x = cell_to_x(best, W, w);
            if (mode == DecodeMode::Expectation) {
                double peak = pred.loc(best, j, i, k);
                double z = 0.0, mean = 0.0;
                for (int c = 0; c < w; ++c) {
                    const double p = std::exp(pred.loc(c, j, i, k) - peak);
                    z += p;
                    mean += p * c;
                }
                x = (mean / z + 0.5) * W / w;
            }
            track.vertices.push_back({x, rows[j]});
        }
        if (track.vertices.size() >= 2) out.tracks.push_back(std::move(track));
    }
    return out;
}

Prediction one_hot(const GridTarget& target) {
    Prediction p;
    p.w = target.w;
    p.h = target.h;
    p.C = target.C;
    p.n = target.n;
    p.loc_logits.assign(static_cast<std::size_t>(target.w + 1) * target.h * target.C * target.n, 0.0);
    p.group_logits.assign(target.n, 0.0);
    for (int k = 0; k < target.n; ++k)
        for (int j = 0; j < target.h; ++j)
            for (int i = 0; i < target.C; ++i)
                p.loc_logits[Prediction::loc_index(target.at(k, j, i), j, i, k, target.h, target.C, target.n)] = 1.0;
    p.group_logits[target.gt_group] = 1.0;
    return p;
}

}  // namespace ufatd
