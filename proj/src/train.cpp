#include "ufatd/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "ufatd/error.hpp"
#include "ufatd/rng.hpp"

namespace ufatd {

int TrainSchedule::backbone_unfreeze_epoch() const {
    return static_cast<int>(std::floor(unfreeze_backbone_fraction * epochs));
}

int TrainSchedule::pi_unfreeze_epoch() const { return static_cast<int>(std::floor(unfreeze_pi_fraction * epochs)); }

void validate(const TrainSchedule& s) {
    if (s.epochs <= 0 || s.batch <= 0) fail(ErrorKind::Config, "train.epochs and train.batch must be positive");
    if (!(0.0 < s.unfreeze_backbone_fraction && s.unfreeze_backbone_fraction <= s.unfreeze_pi_fraction &&
          s.unfreeze_pi_fraction < 1.0)) {
        fail(ErrorKind::Config, "need 0 < unfreeze_backbone_fraction <= unfreeze_pi_fraction < 1");
    }
    if (s.lambda < 0.0) fail(ErrorKind::Config, "train.lambda must be >= 0");
    for (double lr : s.base_lr)
        if (!(lr >= 0.0)) fail(ErrorKind::Config, "learning rates must be >= 0");
}

Batch make_batch(const ModelConfig& cfg, std::span<const Example> examples, std::span<const std::size_t> order) {
    const int B = static_cast<int>(order.size());
    const std::size_t per = static_cast<std::size_t>(cfg.channels) * cfg.in_h * cfg.in_w;
    Batch batch;
    batch.images = Tensor({B, cfg.channels, cfg.in_h, cfg.in_w});
    for (int b = 0; b < B; ++b) {
        const Example& e = examples[order[b]];
        if (e.input.size() != per) fail(ErrorKind::Input, "example input size does not match the model");
        std::copy(e.input.begin(), e.input.end(), batch.images.data.begin() + static_cast<std::ptrdiff_t>(b * per));
        batch.targets.push_back(e.target);
        batch.groups.push_back(e.target.gt_group);
    }
    return batch;
}

Inference infer(const Model& model, const ModelParams& params, std::span<const Example> examples,
                const AnchorSet& anchors, int native_w, DecodeMode mode, int batch) {
    Inference out;
    out.decoded.reserve(examples.size());
    for (std::size_t start = 0; start < examples.size(); start += static_cast<std::size_t>(batch)) {
        const std::size_t end = std::min(examples.size(), start + static_cast<std::size_t>(batch));
        std::vector<std::size_t> order(end - start);
        std::iota(order.begin(), order.end(), start);
        const Batch b = make_batch(model.config(), examples, order);
        const BatchPrediction pred = model.forward(params, b.images);
        for (int i = 0; i < pred.batch(); ++i) {
            out.decoded.push_back(decode(pred.image(i), anchors, native_w, model.config().w, mode));
        }
    }
    return out;
}

ValidationMetrics score(const Inference& inf, std::span<const Example> examples, const EvalConfig& eval) {
    std::vector<ImageLines> lines;
    long correct = 0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        lines.push_back({inf.decoded[i].tracks, examples[i].tracks});
        correct += inf.decoded[i].group == examples[i].target.gt_group;
    }
    const auto matrices = corpus_iou(lines, eval);
    ValidationMetrics m;
    m.f1_50 = f1_at(matrices, 0.5, eval.matching).f1;
    m.pi_acc = examples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(examples.size());
    return m;
}

TrainResult train(const Model& model, const TrainSchedule& schedule, const TrainContext& ctx,
                  std::span<const Example> train_set, std::span<const Example> val_set, const TrainHooks& hooks) {
    validate(schedule);
    if (train_set.empty() || val_set.empty()) fail(ErrorKind::Input, "training and validation sets must be non-empty");
    const ModelConfig& cfg = model.config();
    if (ctx.anchors.h() != cfg.h || ctx.anchors.n() != cfg.n) {
        fail(ErrorKind::Input, "anchor file does not match model h/n");
    }

    ModelParams params = model.init(schedule.seed);
    AdamState adam = AdamState::for_params(params);
    TrainResult result;
    ValidationMetrics best{-1.0, -1.0};

    const std::size_t N = train_set.size();
    const int steps_per_epoch = static_cast<int>((N + schedule.batch - 1) / schedule.batch);
    std::vector<std::size_t> order(N);

    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        params.set_frozen(ParamGroup::Backbone, epoch < schedule.backbone_unfreeze_epoch());
        params.set_frozen(ParamGroup::PiHead, epoch < schedule.pi_unfreeze_epoch());
        const double lambda = schedule.lambda_at(epoch);

        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = Rng::derive(schedule.seed, static_cast<std::uint64_t>(epoch));
        shuffle(order, rng);

        EpochMetrics m;
        m.epoch = epoch;
        m.lambda = lambda;
        m.lr_backbone = cosine_lr(epoch, schedule.epochs, schedule.base_lr[0]);
        double hcl_sum = 0.0, pi_sum = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            const std::size_t from = static_cast<std::size_t>(step) * schedule.batch;
            const std::size_t to = std::min(N, from + static_cast<std::size_t>(schedule.batch));
            const Batch batch = make_batch(cfg, train_set, std::span(order).subspan(from, to - from));

            Gradients grads;
            const LossBreakdown loss = loss_and_gradients(model, params, batch, lambda, grads);
            const double position = epoch + static_cast<double>(step) / steps_per_epoch;
            std::array<double, 3> lr{};
            for (int g = 0; g < 3; ++g) lr[g] = cosine_lr(position, schedule.epochs, schedule.base_lr[g]);
            adam_step(params, grads, adam, lr, schedule.adam);

            hcl_sum += loss.l_hcl * static_cast<double>(to - from);
            pi_sum += loss.l_pi * static_cast<double>(to - from);
            if (hooks.on_step) hooks.on_step({epoch, step, loss});
        }
        m.l_hcl = hcl_sum / static_cast<double>(N);
        m.l_pi = pi_sum / static_cast<double>(N);

        const Inference inf = infer(model, params, val_set, ctx.anchors, ctx.eval.width, ctx.decode, schedule.batch);
        const ValidationMetrics v = score(inf, val_set, ctx.eval);
        m.val_f1_50 = v.f1_50;
        m.val_pi_acc = v.pi_acc;
        const bool improved = v.f1_50 > best.f1_50 || (v.f1_50 == best.f1_50 && v.pi_acc > best.pi_acc);
        if (improved) {
            best = v;
            result.best = params;
            result.best_epoch = epoch;
        }
        result.log.push_back(m);
        if (hooks.on_epoch) hooks.on_epoch(m, params, improved);
    }
    result.best.frozen = {false, false, false};
    return result;
}

}  // namespace ufatd
