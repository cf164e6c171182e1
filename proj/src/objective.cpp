#include "ufatd/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "ufatd/error.hpp"
#include "ufatd/rng.hpp"

namespace ufatd {

LossBreakdown batch_loss(const Model& model, const ModelParams& params, const Batch& batch, double lambda) {
    const BatchPrediction out = model.forward(params, batch.images);
    const double l_hcl = hcl_loss(out.loc_logits, batch.targets);
    const double l_pi = pi_loss(out.group_logits, batch.groups);
    return total_loss(l_hcl, l_pi, lambda);
}

LossBreakdown loss_and_gradients(const Model& model, const ModelParams& params, const Batch& batch, double lambda,
                                 Gradients& grads) {
    Model::Activations cache;
    const BatchPrediction out = model.forward(params, batch.images, &cache);
    Tensor d_loc, d_group;
    const double l_hcl = hcl_loss(out.loc_logits, batch.targets, &d_loc);
    const double l_pi = pi_loss(out.group_logits, batch.groups, &d_group);
    const LossBreakdown loss = total_loss(l_hcl, l_pi, lambda);
    if (!std::isfinite(loss.l_total)) {
        fail(ErrorKind::Numeric, fmt::format("non-finite loss (l_hcl={}, l_pi={})", l_hcl, l_pi));
    }
    for (double& v : d_group.data) v *= lambda;
    grads = model.backward(params, cache, d_loc, d_group);
    return loss;
}

GradCheckResult finite_diff_check(const Model& model, const ModelParams& params, const Batch& batch, double lambda,
                                  double step, double tol, int samples, std::uint64_t seed) {
    Gradients analytic;
    loss_and_gradients(model, params, batch, lambda, analytic);

    std::vector<std::size_t> live;
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        if (!params.is_frozen(params.tensors[t].group)) live.push_back(t);
    }
    GradCheckResult result;
    if (live.empty()) return result;

    const std::size_t per_tensor = std::max<std::size_t>(8, (static_cast<std::size_t>(samples) + live.size() - 1) / live.size());
    std::vector<std::size_t> quota(live.size());
    std::size_t total = 0;
    for (std::size_t l = 0; l < live.size(); ++l) {
        quota[l] = std::min(params.tensors[live[l]].value.size(), per_tensor);
        total += quota[l];
    }
    for (std::size_t l = 0; l < live.size() && total < static_cast<std::size_t>(samples); ++l) {
        const std::size_t extra =
            std::min(params.tensors[live[l]].value.size() - quota[l], static_cast<std::size_t>(samples) - total);
        quota[l] += extra;
        total += extra;
    }

    Rng rng(seed);
    ModelParams probe = params;
    for (std::size_t l = 0; l < live.size(); ++l) {
        const std::size_t t = live[l];
        std::vector<std::size_t> picks(params.tensors[t].value.size());
        std::iota(picks.begin(), picks.end(), std::size_t{0});
        shuffle(picks, rng);
        picks.resize(quota[l]);
        for (std::size_t i : picks) {
            double& w = probe.tensors[t].value.data[i];
            const double saved = w;
            w = saved + step;
            const double up = batch_loss(model, probe, batch, lambda).l_total;
            w = saved - step;
            const double down = batch_loss(model, probe, batch, lambda).l_total;
            w = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[t].data[i];
            const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
            ++result.checked;
            if (err >= result.max_rel_error) {
                result.max_rel_error = err;
                result.worst_param = params.tensors[t].name;
                result.worst_index = i;
                result.worst_analytic = a;
                result.worst_numeric = numeric;
            }
        }
    }
    if (result.max_rel_error > tol) {
        fail(ErrorKind::Validation,
             fmt::format("gradient check failed: {}[{}] analytic {} vs numeric {} (rel error {:.3e} > {:.1e})",
                         result.worst_param, result.worst_index, result.worst_analytic, result.worst_numeric,
                         result.max_rel_error, tol));
    }
    return result;
}

}  // namespace ufatd
