#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ufatd/anchors.hpp"
#include "ufatd/codec.hpp"
#include "ufatd/eval.hpp"
#include "ufatd/objective.hpp"
#include "ufatd/optim.hpp"

namespace ufatd {

/// Staged schedule: the backbone trains from floor(unfreeze_backbone_fraction*E),
/// the group head (and lambda > 0) from floor(unfreeze_pi_fraction*E).
struct TrainSchedule {
    int epochs = 60;
    int batch = 32;
    std::array<double, 3> base_lr{4e-4, 1e-3, 5e-5};  // backbone, hcl_head, pi_head
    double unfreeze_backbone_fraction = 0.05;
    double unfreeze_pi_fraction = 0.15;
    double lambda = 0.05;
    AdamConfig adam;
    std::uint64_t seed = 1;

    int backbone_unfreeze_epoch() const;
    int pi_unfreeze_epoch() const;
    double lambda_at(int epoch) const { return epoch < pi_unfreeze_epoch() ? 0.0 : lambda; }
};

void validate(const TrainSchedule& s);

/// A decoded-ready training item: the model input, its grid target, and the
/// ground-truth polylines in native image coordinates.
struct Example {
    std::vector<double> input;
    GridTarget target;
    std::vector<Polyline> tracks;
};

Batch make_batch(const ModelConfig& cfg, std::span<const Example> examples, std::span<const std::size_t> order);

/// Batched forward + decode of every example.
struct Inference {
    std::vector<DecodedTracks> decoded;
};
Inference infer(const Model& model, const ModelParams& params, std::span<const Example> examples,
                const AnchorSet& anchors, int native_w, DecodeMode mode, int batch = 32);

struct ValidationMetrics {
    double f1_50 = 0.0;
    double pi_acc = 0.0;
};
ValidationMetrics score(const Inference& inf, std::span<const Example> examples, const EvalConfig& eval);

struct EpochMetrics {
    int epoch = 0;
    double l_hcl = 0.0;
    double l_pi = 0.0;
    double lambda = 0.0;
    double lr_backbone = 0.0;
    double val_f1_50 = 0.0;
    double val_pi_acc = 0.0;
};

struct StepRecord {
    int epoch = 0;
    int step = 0;
    LossBreakdown loss;
};

struct TrainHooks {
    std::function<void(const StepRecord&)> on_step;
    /// Called after validation; `improved` marks a new best checkpoint.
    std::function<void(const EpochMetrics&, const ModelParams&, bool improved)> on_epoch;
};

struct TrainResult {
    ModelParams best;
    int best_epoch = -1;
    std::vector<EpochMetrics> log;
};

struct TrainContext {
    const AnchorSet& anchors;
    EvalConfig eval;        // native image dims for decoding/scoring
    DecodeMode decode = DecodeMode::Argmax;
};

TrainResult train(const Model& model, const TrainSchedule& schedule, const TrainContext& ctx,
                  std::span<const Example> train_set, std::span<const Example> val_set, const TrainHooks& hooks = {});

}  // namespace ufatd
