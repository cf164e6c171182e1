#include "ufatd/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "ufatd/error.hpp"

namespace ufatd {

void validate(const AnchorGenSpec& spec) {
    if (spec.h < 2) fail(ErrorKind::Domain, fmt::format("anchor rows per group must be >= 2, got {}", spec.h));
    if (spec.n < 1) fail(ErrorKind::Domain, fmt::format("anchor group count must be >= 1, got {}", spec.n));
    if (!(spec.y_min >= 0.0 && spec.y_min <= spec.y_max && spec.y_max < spec.h_anchor)) {
        fail(ErrorKind::Domain, fmt::format("anchor spec needs 0 <= y_min <= y_max < H_anchor, got {} {} {}",
                                            spec.y_min, spec.y_max, spec.h_anchor));
    }
}

double scaling_factor(double x) {
    if (!(x >= 0.0 && x <= 2.0)) fail(ErrorKind::Domain, fmt::format("scaling factor argument {} outside [0, 2]", x));
    const double arc = std::sqrt(1.0 - (1.0 - x) * (1.0 - x));
    return x <= 1.0 ? arc : 2.0 - arc;
}

double group_start(int k, const AnchorGenSpec& spec) {
    if (k < 0 || k >= spec.n) fail(ErrorKind::Index, fmt::format("group {} out of range [0, {})", k, spec.n));
    if (spec.n == 1) return spec.y_min;
    return spec.y_min + (static_cast<double>(k) / (spec.n - 1)) * (spec.y_max - spec.y_min);
}

AnchorGroup generate_group(int k, const AnchorGenSpec& spec) {
    validate(spec);
    AnchorGroup g;
    g.k = k;
    g.start = group_start(k, spec);
    const double base_gap = (spec.h_anchor - g.start) / (spec.h - 1);
    g.rows.resize(spec.h);
    double y = g.start;
    for (int j = 0; j < spec.h; ++j) {
        y += base_gap * scaling_factor(2.0 * j / spec.h);
        g.rows[j] = y;
    }
    return g;
}

AnchorGroup generate_equidistant_group(int k, const AnchorGenSpec& spec) {
    validate(spec);
    AnchorGroup g;
    g.k = k;
    g.start = group_start(k, spec);
    const double gap = (spec.h_anchor - g.start) / (spec.h - 1);
    g.rows.resize(spec.h);
    for (int j = 0; j < spec.h; ++j) g.rows[j] = g.start + j * gap;
    return g;
}

AnchorSet generate_set(const AnchorGenSpec& spec) {
    validate(spec);
    AnchorSet set{spec, AnchorSpacing::Nonuniform, {}};
    for (int k = 0; k < spec.n; ++k) set.groups.push_back(generate_group(k, spec));
    return set;
}

AnchorSet generate_equidistant_set(const AnchorGenSpec& spec) {
    validate(spec);
    AnchorSet set{spec, AnchorSpacing::Equidistant, {}};
    for (int k = 0; k < spec.n; ++k) set.groups.push_back(generate_equidistant_group(k, spec));
    return set;
}

double reduction_ratio(int H, int W, int h, int w, int n) {
    if (H <= 0 || W <= 0 || h <= 0 || w <= 0 || n <= 0) {
        fail(ErrorKind::Domain, "reduction ratio arguments must all be positive");
    }
    return (static_cast<double>(H) * W) / (static_cast<double>(h) * (w + 1) * n);
}

namespace {

double highest_top(std::span<const Polyline> tracks) {
    double top = std::numeric_limits<double>::infinity();
    for (const auto& t : tracks) {
        if (!t.vertices.empty()) top = std::min(top, t.top());
    }
    return top;
}

}  // namespace

int assign_group(std::span<const Polyline> tracks, const AnchorSet& set) {
    const double top = highest_top(tracks);
    if (!std::isfinite(top)) fail(ErrorKind::Input, "assign_group needs at least one non-empty track");
    int best = 0;
    for (const auto& g : set.groups) {
        if (g.start <= top) best = std::max(best, g.k);
    }
    return best;
}

TopRowExtent top_row_extent(std::span<const std::vector<Polyline>> corpus) {
    TopRowExtent e{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& image : corpus) {
        const double top = highest_top(image);
        if (!std::isfinite(top)) continue;
        e.y_min = std::min(e.y_min, top);
        e.y_max = std::max(e.y_max, top);
    }
    if (!std::isfinite(e.y_min)) fail(ErrorKind::Input, "no tracks found while scanning label corpus");
    return e;
}

}  // namespace ufatd
