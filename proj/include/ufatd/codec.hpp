#pragma once

#include <span>
#include <vector>

#include "ufatd/anchors.hpp"
#include "ufatd/polyline.hpp"

namespace ufatd {

/// Per-group, per-row, per-track cell indices; `background()` marks rows the
/// track does not cross.
struct GridTarget {
    int n = 0, h = 0, C = 0, w = 0;
    std::vector<int> cells;  // [n][h][C]
    int gt_group = 0;

    int background() const { return w; }
    int& at(int k, int j, int i) { return cells[(static_cast<std::size_t>(k) * h + j) * C + i]; }
    int at(int k, int j, int i) const { return cells[(static_cast<std::size_t>(k) * h + j) * C + i]; }
    bool operator==(const GridTarget&) const = default;
};

/// Location logits laid out [(w+1)][h][C][n] plus n group logits, for one image.
struct Prediction {
    int w = 0, h = 0, C = 0, n = 0;
    std::vector<double> loc_logits;
    std::vector<double> group_logits;

    static std::size_t loc_index(int cell, int j, int i, int k, int h, int C, int n) {
        return ((static_cast<std::size_t>(cell) * h + j) * C + i) * n + k;
    }
    double loc(int cell, int j, int i, int k) const { return loc_logits[loc_index(cell, j, i, k, h, C, n)]; }
};

struct DecodedTracks {
    int group = 0;
    std::vector<Polyline> tracks;
};

enum class DecodeMode {
    Argmax,       // class centre of the winning cell
    Expectation,  // softmax-weighted mean cell over the w location cells when the row is not background
};

int x_to_cell(double x, int W, int w);
double cell_to_x(int c, int W, int w);

/// Rasterises each track onto every group's anchor rows. Tracks are keyed by
/// track_index, so input order does not matter.
GridTarget encode(std::span<const Polyline> tracks, const AnchorSet& set, int W, int w, int C);

/// Selects the group by argmax of the group logits, then reads one cell per
/// anchor row of that group. Tracks with fewer than two points are dropped.
DecodedTracks decode(const Prediction& pred, const AnchorSet& set, int W, int w,
                     DecodeMode mode = DecodeMode::Argmax);

/// Logits with 1 at every target cell and 0 elsewhere; group logit 1 at gt_group.
Prediction one_hot(const GridTarget& target);

}  // namespace ufatd
