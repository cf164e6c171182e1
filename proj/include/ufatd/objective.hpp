#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ufatd/loss.hpp"
#include "ufatd/model.hpp"

namespace ufatd {

struct Batch {
    Tensor images;                   // [B, channels, in_h, in_w]
    std::vector<GridTarget> targets;
    std::vector<int> groups;         // perspective-identifier labels
};

/// l_hcl + lambda * l_pi for one batch.
LossBreakdown batch_loss(const Model& model, const ModelParams& params, const Batch& batch, double lambda);

/// Same loss plus gradients for every parameter (zero for frozen groups).
/// Throws Numeric when the loss is not finite.
LossBreakdown loss_and_gradients(const Model& model, const ModelParams& params, const Batch& batch, double lambda,
                                 Gradients& grads);

struct GradCheckResult {
    double max_rel_error = 0.0;
    int checked = 0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/// Compares analytic gradients against central differences on a random subset
/// of at least `samples` scalars drawn from every trainable tensor. Error is
/// |analytic - numeric| / max(1, |analytic|). Throws Validation, naming the
/// worst scalar, when the error exceeds `tol`.
GradCheckResult finite_diff_check(const Model& model, const ModelParams& params, const Batch& batch, double lambda,
                                  double step = 1e-6, double tol = 1e-4, int samples = 200, std::uint64_t seed = 1);

}  // namespace ufatd
