#include "ufatd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "ufatd/error.hpp"

namespace ufatd {

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

std::vector<double> EvalConfig::canonical_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
    return t;
}

double EvalConfig::effective_line_width() const {
    return line_width > 0.0 ? line_width : std::max(1.0, std::round(30.0 * width / 1640.0));
}

void validate(const EvalConfig& cfg) {
    if (cfg.width <= 0 || cfg.height <= 0) fail(ErrorKind::Config, "eval image dimensions must be positive");
    if (cfg.thresholds.empty()) fail(ErrorKind::Config, "eval needs at least one IoU threshold");
    for (std::size_t i = 0; i < cfg.thresholds.size(); ++i) {
        const double t = cfg.thresholds[i];
        if (!(t > 0.0 && t <= 1.0)) fail(ErrorKind::Config, fmt::format("IoU threshold {} outside (0, 1]", t));
        if (i > 0 && !(t > cfg.thresholds[i - 1])) fail(ErrorKind::Config, "IoU thresholds must be sorted ascending");
    }
}

MatchResult finalize(long tp, long fp, long fn) {
    MatchResult r{tp, fp, fn, 0.0, 0.0, 0.0};
    r.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

namespace {

double segment_distance(double px, double py, const Point& a, const Point& b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = a.x + t * dx - px, ey = a.y + t * dy - py;
    return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

Mask rasterize(const Polyline& p, double width, int img_w, int img_h) {
    Mask m(img_w, img_h);
    const double r = width / 2.0;
    const auto& v = p.vertices;
    for (std::size_t s = 0; s + 1 < v.size() || (v.size() == 1 && s == 0); ++s) {
        const Point& a = v[s];
        const Point& b = v.size() == 1 ? v[s] : v[s + 1];
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r - 0.5)));
        const int x1 = std::min(img_w - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r - 0.5)));
        const int y1 = std::min(img_h - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r - 0.5)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                if (segment_distance(x + 0.5, y + 0.5, a, b) <= r + 1e-9) m.at(x, y) = 1;
            }
        }
    }
    return m;
}

double iou(const Mask& a, const Mask& b) {
    if (a.width != b.width || a.height != b.height) fail(ErrorKind::Input, "IoU of masks with different dimensions");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        const bool x = a.bits[i] != 0, y = b.bits[i] != 0;
        inter += x && y;
        uni += x || y;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

IouMatrix pairwise_iou(std::span<const Polyline> preds, std::span<const Polyline> gts, const EvalConfig& cfg) {
    const double lw = cfg.effective_line_width();
    std::vector<Mask> pm, gm;
    for (const auto& p : preds) pm.push_back(rasterize(p, lw, cfg.width, cfg.height));
    for (const auto& g : gts) gm.push_back(rasterize(g, lw, cfg.width, cfg.height));
    IouMatrix m{static_cast<int>(preds.size()), static_cast<int>(gts.size()), {}};
    m.values.resize(pm.size() * gm.size());
    for (std::size_t i = 0; i < pm.size(); ++i)
        for (std::size_t j = 0; j < gm.size(); ++j) m.values[i * gm.size() + j] = iou(pm[i], gm[j]);
    return m;
}

namespace {

long greedy_matches(const IouMatrix& m, double tau) {
    struct Pair {
        double iou;
        int p, g;
    };
    std::vector<Pair> pairs;
    for (int p = 0; p < m.preds; ++p)
        for (int g = 0; g < m.gts; ++g)
            if (m.at(p, g) >= tau) pairs.push_back({m.at(p, g), p, g});
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.p != b.p) return a.p < b.p;
        return a.g < b.g;
    });
    std::vector<char> used_p(m.preds, 0), used_g(m.gts, 0);
    long matched = 0;
    for (const auto& pr : pairs) {
        if (used_p[pr.p] || used_g[pr.g]) continue;
        used_p[pr.p] = used_g[pr.g] = 1;
        ++matched;
    }
    return matched;
}

// Kuhn's augmenting paths; the graphs here have a handful of nodes.
long optimal_matches(const IouMatrix& m, double tau) {
    std::vector<int> gt_owner(m.gts, -1);
    auto augment = [&](auto&& self, int p, std::vector<char>& seen) -> bool {
        for (int g = 0; g < m.gts; ++g) {
            if (m.at(p, g) < tau || seen[g]) continue;
            seen[g] = 1;
            if (gt_owner[g] < 0 || self(self, gt_owner[g], seen)) {
                gt_owner[g] = p;
                return true;
            }
        }
        return false;
    };
    long matched = 0;
    for (int p = 0; p < m.preds; ++p) {
        std::vector<char> seen(m.gts, 0);
        if (augment(augment, p, seen)) ++matched;
    }
    return matched;
}

}  // namespace

MatchResult match(const IouMatrix& m, double tau, MatchMode mode) {
    const long tp = mode == MatchMode::Greedy ? greedy_matches(m, tau) : optimal_matches(m, tau);
    return finalize(tp, m.preds - tp, m.gts - tp);
}

MatchResult match(std::span<const Polyline> preds, std::span<const Polyline> gts, double tau, const EvalConfig& cfg) {
    return match(pairwise_iou(preds, gts, cfg), tau, cfg.matching);
}

std::vector<IouMatrix> corpus_iou(std::span<const ImageLines> corpus, const EvalConfig& cfg) {
    validate(cfg);
    std::vector<IouMatrix> out(corpus.size());
    const long n = static_cast<long>(corpus.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (long i = 0; i < n; ++i) out[i] = pairwise_iou(corpus[i].preds, corpus[i].gts, cfg);
    return out;
}

MatchResult f1_at(std::span<const IouMatrix> corpus, double tau, MatchMode mode) {
    long tp = 0, fp = 0, fn = 0;
    for (const auto& m : corpus) {
        const MatchResult r = match(m, tau, mode);
        tp += r.tp;
        fp += r.fp;
        fn += r.fn;
    }
    return finalize(tp, fp, fn);
}

double mf1(std::span<const IouMatrix> corpus, const EvalConfig& cfg) {
    const auto canonical = EvalConfig::canonical_thresholds();
    if (cfg.thresholds.size() != canonical.size() ||
        !std::equal(canonical.begin(), canonical.end(), cfg.thresholds.begin(),
                    [](double a, double b) { return std::abs(a - b) < 1e-12; })) {
        fail(ErrorKind::Config, "mF1 requires the ten thresholds 0.50, 0.55, ..., 0.95");
    }
    double sum = 0.0;
    for (double t : canonical) sum += f1_at(corpus, t, cfg.matching).f1;
    return sum / static_cast<double>(canonical.size());
}

double EvalReport::f1_at(double tau) const {
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (std::abs(thresholds[i] - tau) < 1e-9) return results[i].f1;
    }
    fail(ErrorKind::Input, fmt::format("threshold {} was not evaluated", tau));
}

EvalReport evaluate(std::span<const ImageLines> corpus, const EvalConfig& cfg) {
    const auto matrices = corpus_iou(corpus, cfg);
    EvalReport report;
    report.thresholds = cfg.thresholds;
    for (double t : cfg.thresholds) report.results.push_back(f1_at(matrices, t, cfg.matching));
    const auto canonical = EvalConfig::canonical_thresholds();
    if (cfg.thresholds.size() == canonical.size()) report.mf1 = mf1(matrices, cfg);
    return report;
}

AccResult acc(std::span<const ImageLines> corpus, std::span<const std::vector<double>> rows, double tol_px) {
    if (rows.size() != corpus.size()) fail(ErrorKind::Input, "ACC needs one row list per image");
    AccResult r;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        for (const auto& gt : corpus[i].gts) {
            const Polyline* pred = nullptr;
            for (const auto& p : corpus[i].preds) {
                if (p.track_index == gt.track_index) pred = &p;
            }
            for (double y : rows[i]) {
                const auto xg = sample_at_row(gt, y);
                if (!xg) continue;
                ++r.total;
                if (!pred) continue;
                const auto xp = sample_at_row(*pred, y);
                if (xp && std::abs(*xp - *xg) <= tol_px) ++r.correct;
            }
        }
    }
    r.acc = r.total > 0 ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
    return r;
}

}  // namespace ufatd
