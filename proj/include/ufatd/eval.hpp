#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ufatd/polyline.hpp"

namespace ufatd {

/// Binary raster; pixel (x, y) is the unit square centred at (x + 0.5, y + 0.5).
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}
    std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::size_t count() const;
    bool operator==(const Mask&) const = default;
};

enum class MatchMode { Greedy, Optimal };

struct EvalConfig {
    int width = 320;
    int height = 160;
    double line_width = 0.0;  // <= 0 means round(30 * width / 1640)
    std::vector<double> thresholds = canonical_thresholds();
    MatchMode matching = MatchMode::Greedy;

    double effective_line_width() const;
    static std::vector<double> canonical_thresholds();  // 0.50, 0.55, ..., 0.95
};

void validate(const EvalConfig& cfg);

struct MatchResult {
    long tp = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

/// Fills precision/recall/F1 from the counts; zero denominators give 0.
MatchResult finalize(long tp, long fp, long fn);

/// Every pixel whose centre lies within width/2 of a segment of `p`.
Mask rasterize(const Polyline& p, double width, int img_w, int img_h);

double iou(const Mask& a, const Mask& b);

/// iou[p][g] between rasterised predictions and ground truth of one image.
struct IouMatrix {
    int preds = 0, gts = 0;
    std::vector<double> values;
    double at(int p, int g) const { return values[static_cast<std::size_t>(p) * gts + g]; }
};

IouMatrix pairwise_iou(std::span<const Polyline> preds, std::span<const Polyline> gts, const EvalConfig& cfg);

/// One-to-one matching among pairs with IoU >= tau. Greedy takes pairs by
/// descending IoU (ties: lower pred index, then lower gt index); Optimal
/// maximises the number of matches.
MatchResult match(const IouMatrix& m, double tau, MatchMode mode);
MatchResult match(std::span<const Polyline> preds, std::span<const Polyline> gts, double tau, const EvalConfig& cfg);

struct ImageLines {
    std::vector<Polyline> preds;
    std::vector<Polyline> gts;
};

/// Per-image IoU matrices, computed in parallel across images.
std::vector<IouMatrix> corpus_iou(std::span<const ImageLines> corpus, const EvalConfig& cfg);

/// Counts summed over all images before precision/recall/F1 are formed.
MatchResult f1_at(std::span<const IouMatrix> corpus, double tau, MatchMode mode);

/// Mean of F1 at the ten canonical thresholds; Config error for any other threshold set.
double mf1(std::span<const IouMatrix> corpus, const EvalConfig& cfg);

struct EvalReport {
    std::vector<double> thresholds;
    std::vector<MatchResult> results;
    double mf1 = 0.0;
    double f1_at(double tau) const;
};

EvalReport evaluate(std::span<const ImageLines> corpus, const EvalConfig& cfg);

struct AccResult {
    long correct = 0;
    long total = 0;
    double acc = 0.0;
};

/// Ground-truth points are taken at `rows[image]`; one counts as correct when
/// the prediction with the same track index covers that row within tol_px.
AccResult acc(std::span<const ImageLines> corpus, std::span<const std::vector<double>> rows, double tol_px);

}  // namespace ufatd
