#include "ufatd/optim.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "ufatd/error.hpp"

namespace ufatd {

double cosine_lr(double step_epoch, int epochs, double lr0) {
    if (epochs <= 0 || step_epoch < 0.0 || step_epoch > epochs) {
        fail(ErrorKind::Domain, fmt::format("cosine schedule position {} outside [0, {}]", step_epoch, epochs));
    }
    return lr0 * (1.0 + std::cos(std::numbers::pi * step_epoch / epochs)) / 2.0;
}

AdamState AdamState::for_params(const ModelParams& params) {
    AdamState s;
    s.m = zeros_like(params);
    s.v = zeros_like(params);
    s.steps.assign(params.tensors.size(), 0);
    return s;
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, const std::array<double, 3>& lr,
               const AdamConfig& cfg) {
    if (grads.size() != params.tensors.size() || state.m.size() != params.tensors.size()) {
        fail(ErrorKind::Input, "gradient/optimizer state does not match parameters");
    }
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        Param& p = params.tensors[t];
        if (params.is_frozen(p.group)) continue;
        const long step = ++state.steps[t];
        const double rate = lr[static_cast<int>(p.group)];
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
        auto& m = state.m[t].data;
        auto& v = state.v[t].data;
        const auto& g = grads[t].data;
        auto& w = p.value.data;
        const long n = static_cast<long>(w.size());
        bool finite = true;
#pragma omp parallel for schedule(static) reduction(&& : finite)
        for (long i = 0; i < n; ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double update = rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
            finite = finite && std::isfinite(update);
            w[i] -= update;
        }
        if (!finite) fail(ErrorKind::Numeric, fmt::format("non-finite Adam update in {}", p.name));
    }
}

}  // namespace ufatd
