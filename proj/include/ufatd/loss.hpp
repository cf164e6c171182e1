#pragma once

#include <span>

#include "ufatd/codec.hpp"
#include "ufatd/tensor.hpp"

namespace ufatd {

struct LossBreakdown {
    double l_hcl = 0.0;
    double l_pi = 0.0;
    double lambda = 0.0;
    double l_total = 0.0;
};

LossBreakdown total_loss(double l_hcl, double l_pi, double lambda);

/// Cross-entropy over the w+1 cells, summed over every (track, row, group)
/// and averaged over the batch. loc_logits is [B, w+1, h, C, n]. When `grad`
/// is given it receives d(loss)/d(logits).
double hcl_loss(const Tensor& loc_logits, std::span<const GridTarget> targets, Tensor* grad = nullptr);

/// -log softmax(group_logits)[gt], averaged over the batch. group_logits is [B, n].
double pi_loss(const Tensor& group_logits, std::span<const int> gt_groups, Tensor* grad = nullptr);

double hcl_loss(const Prediction& pred, const GridTarget& target);
double pi_loss(std::span<const double> group_logits, int gt_group);

}  // namespace ufatd
