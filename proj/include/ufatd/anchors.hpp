#pragma once

#include <span>
#include <vector>

#include "ufatd/polyline.hpp"

namespace ufatd {

/// Parameters of an anchor set: h rows per group, n groups whose starts are
/// spread evenly over [y_min, y_max], every group ending at h_anchor.
struct AnchorGenSpec {
    int h = 12;
    int n = 3;
    double y_min = 0.0;
    double y_max = 0.0;
    double h_anchor = 0.0;
    bool operator==(const AnchorGenSpec&) const = default;
};

struct AnchorGroup {
    int k = 0;
    double start = 0.0;
    std::vector<double> rows;
    bool operator==(const AnchorGroup&) const = default;
};

enum class AnchorSpacing { Nonuniform, Equidistant };

struct AnchorSet {
    AnchorGenSpec spec;
    AnchorSpacing spacing = AnchorSpacing::Nonuniform;
    std::vector<AnchorGroup> groups;

    int h() const { return spec.h; }
    int n() const { return spec.n; }
};

void validate(const AnchorGenSpec& spec);

/// Circular-arc ramp on [0, 2]: sqrt(1-(1-x)^2) below 1, 2 - sqrt(1-(1-x)^2) above.
/// Steep near 0 and flat near 1, so row gaps grow slowly near the top of a group.
double scaling_factor(double x);

/// s_k. A single group (n = 1) starts at y_min.
double group_start(int k, const AnchorGenSpec& spec);

/// rows[j] = s_k + sum_{m<=j} d_k * f(2m/h), with d_k = (h_anchor - s_k)/(h-1).
/// The sum of f(2m/h) over m < h telescopes to h-1, so rows[h-1] == h_anchor.
AnchorGroup generate_group(int k, const AnchorGenSpec& spec);
AnchorGroup generate_equidistant_group(int k, const AnchorGenSpec& spec);

AnchorSet generate_set(const AnchorGenSpec& spec);
AnchorSet generate_equidistant_set(const AnchorGenSpec& spec);

/// (H*W) / (h*(w+1)*n): how many fewer outputs the row classifier has than a
/// per-pixel segmentation head.
double reduction_ratio(int H, int W, int h, int w, int n);

/// Largest k with s_k <= the highest track top (smallest y); 0 if none.
int assign_group(std::span<const Polyline> tracks, const AnchorSet& set);

/// y_min/y_max over the topmost vertex of every track in a corpus.
struct TopRowExtent {
    double y_min = 0.0;
    double y_max = 0.0;
};
TopRowExtent top_row_extent(std::span<const std::vector<Polyline>> corpus);

}  // namespace ufatd
