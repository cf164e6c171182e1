#pragma once

#include <array>
#include <vector>

#include "ufatd/model.hpp"

namespace ufatd {

/// lr0 * (1 + cos(pi * step_epoch / epochs)) / 2
double cosine_lr(double step_epoch, int epochs, double lr0);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moments and step counts per parameter tensor. A tensor's step count only
/// advances while its group is trainable, so bias correction restarts cleanly
/// when a group is unfrozen.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::vector<long> steps;

    static AdamState for_params(const ModelParams& params);
};

/// One bias-corrected Adam update; frozen groups are left untouched.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, const std::array<double, 3>& lr,
               const AdamConfig& cfg = {});

}  // namespace ufatd
