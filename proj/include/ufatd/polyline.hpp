#pragma once

#include <optional>
#include <vector>

namespace ufatd {

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

/// One track as a y-monotone sequence of image points.
struct Polyline {
    int track_index = 0;
    std::vector<Point> vertices;

    double top() const { return vertices.front().y; }
    double bottom() const { return vertices.back().y; }
    bool operator==(const Polyline&) const = default;
};

/// Throws Input if the polyline has < 2 vertices, non-increasing y, or
/// (when width > 0) an x outside [0, width).
void validate(const Polyline& p, double width = 0.0);

/// Linear interpolation of x at row y; empty outside [top, bottom].
std::optional<double> sample_at_row(const Polyline& p, double y);

}  // namespace ufatd
