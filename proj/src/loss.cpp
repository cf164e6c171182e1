#include "ufatd/loss.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "ufatd/error.hpp"

namespace ufatd {

LossBreakdown total_loss(double l_hcl, double l_pi, double lambda) {
    return {l_hcl, l_pi, lambda, l_hcl + lambda * l_pi};
}

double hcl_loss(const Tensor& loc_logits, std::span<const GridTarget> targets, Tensor* grad) {
    if (loc_logits.shape.size() != 5) fail(ErrorKind::Input, "location logits must be [B, w+1, h, C, n]");
    const int B = loc_logits.dim(0), cells = loc_logits.dim(1), h = loc_logits.dim(2), C = loc_logits.dim(3),
              n = loc_logits.dim(4);
    if (static_cast<int>(targets.size()) != B) fail(ErrorKind::Input, "one target per batch item required");
    const std::size_t stride = static_cast<std::size_t>(h) * C * n;
    const std::size_t per_image = stride * cells;
    if (grad) *grad = Tensor(loc_logits.shape);

    std::vector<double> terms(static_cast<std::size_t>(B), 0.0);
    for (int b = 0; b < B; ++b) {
        const auto& t = targets[b];
        if (t.h != h || t.C != C || t.n != n || t.w + 1 != cells) fail(ErrorKind::Input, "target shape mismatch");
        for (int c : t.cells) {
            if (c < 0 || c > t.w) fail(ErrorKind::Input, fmt::format("target cell {} outside [0, {}]", c, t.w));
        }
    }

#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b) {
        const auto& t = targets[b];
        const double* base = loc_logits.data.data() + static_cast<std::size_t>(b) * per_image;
        double* gbase = grad ? grad->data.data() + static_cast<std::size_t>(b) * per_image : nullptr;
        double sum = 0.0;
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < C; ++i)
                for (int k = 0; k < n; ++k) {
                    const std::size_t off = (static_cast<std::size_t>(j) * C + i) * n + k;
                    double peak = base[off];
                    for (int c = 1; c < cells; ++c) peak = std::max(peak, base[c * stride + off]);
                    double z = 0.0;
                    for (int c = 0; c < cells; ++c) z += std::exp(base[c * stride + off] - peak);
                    const int target = t.at(k, j, i);
                    sum += std::log(z) - (base[target * stride + off] - peak);
                    if (gbase) {
                        for (int c = 0; c < cells; ++c) {
                            const double p = std::exp(base[c * stride + off] - peak) / z;
                            gbase[c * stride + off] = (p - (c == target ? 1.0 : 0.0)) / B;
                        }
                    }
                }
        terms[b] = sum;
    }
    double total = 0.0;
    for (double v : terms) total += v;
    return total / B;
}

double pi_loss(const Tensor& group_logits, std::span<const int> gt_groups, Tensor* grad) {
    if (group_logits.shape.size() != 2) fail(ErrorKind::Input, "group logits must be [B, n]");
    const int B = group_logits.dim(0), n = group_logits.dim(1);
    if (static_cast<int>(gt_groups.size()) != B) fail(ErrorKind::Input, "one group label per batch item required");
    if (grad) *grad = Tensor(group_logits.shape);
    double total = 0.0;
    for (int b = 0; b < B; ++b) {
        const int gt = gt_groups[b];
        if (gt < 0 || gt >= n) fail(ErrorKind::Input, fmt::format("group label {} outside [0, {})", gt, n));
        const double* l = group_logits.data.data() + static_cast<std::size_t>(b) * n;
        const double peak = *std::max_element(l, l + n);
        double z = 0.0;
        for (int k = 0; k < n; ++k) z += std::exp(l[k] - peak);
        total += std::log(z) - (l[gt] - peak);
        if (grad) {
            for (int k = 0; k < n; ++k) {
                grad->data[static_cast<std::size_t>(b) * n + k] = (std::exp(l[k] - peak) / z - (k == gt ? 1.0 : 0.0)) / B;
            }
        }
    }
    return total / B;
}

double hcl_loss(const Prediction& pred, const GridTarget& target) {
    Tensor logits({1, pred.w + 1, pred.h, pred.C, pred.n});
    logits.data = pred.loc_logits;
    return hcl_loss(logits, std::span(&target, 1));
}

double pi_loss(std::span<const double> group_logits, int gt_group) {
    Tensor logits({1, static_cast<int>(group_logits.size())});
    logits.data.assign(group_logits.begin(), group_logits.end());
    return pi_loss(logits, std::span(&gt_group, 1));
}

}  // namespace ufatd
