#include "ufatd/polyline.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ufatd/error.hpp"

namespace ufatd {

void validate(const Polyline& p, double width) {
    if (p.vertices.size() < 2) {
        fail(ErrorKind::Input, fmt::format("track {}: polyline needs at least 2 vertices", p.track_index));
    }
    for (std::size_t i = 0; i < p.vertices.size(); ++i) {
        const Point& v = p.vertices[i];
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
            fail(ErrorKind::Input, fmt::format("track {}: non-finite vertex {}", p.track_index, i));
        }
        if (i > 0 && !(v.y > p.vertices[i - 1].y)) {
            fail(ErrorKind::Input, fmt::format("track {}: y not strictly increasing at vertex {}", p.track_index, i));
        }
        if (width > 0.0 && (v.x < 0.0 || v.x >= width)) {
            fail(ErrorKind::Input, fmt::format("track {}: x={} outside [0, {})", p.track_index, v.x, width));
        }
    }
}

std::optional<double> sample_at_row(const Polyline& p, double y) {
    const auto& v = p.vertices;
    if (v.size() < 2 || y < v.front().y || y > v.back().y) return std::nullopt;
    auto hi = std::lower_bound(v.begin(), v.end(), y, [](const Point& a, double row) { return a.y < row; });
    if (hi == v.begin()) return hi->x;
    if (hi->y == y) return hi->x;
    auto lo = hi - 1;
    const double t = (y - lo->y) / (hi->y - lo->y);
    return lo->x + t * (hi->x - lo->x);
}

}  // namespace ufatd
