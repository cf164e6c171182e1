#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ufatd/anchors.hpp"
#include "ufatd/config.hpp"
#include "ufatd/eval.hpp"
#include "ufatd/synth.hpp"
#include "ufatd/train.hpp"

namespace ufatd {

std::filesystem::path split_index(const RunConfig& cfg, const std::string& split);
std::filesystem::path predictions_dir(const RunConfig& cfg);

/// "mF1=0.8123,F1@50=0.97,F1@75=0.5"
std::string format_summary(const EvalReport& report);

DatasetCounts run_synth(const RunConfig& cfg, std::ostream& log);

struct GenAnchorsResult {
    TopRowExtent extent;
    AnchorSet nonuniform;
    AnchorSet equidistant;
};
/// Writes paths.anchors with anchors.spacing plus `<stem>.nonuniform<ext>` and `<stem>.equidistant<ext>` beside it.
GenAnchorsResult run_gen_anchors(const RunConfig& cfg, std::ostream& log);

void run_encode(const RunConfig& cfg, std::ostream& log);

TrainResult run_train(const RunConfig& cfg, std::ostream& log);

void run_infer(const RunConfig& cfg, std::ostream& log);

struct EvalOutcome {
    EvalReport report;
    AccResult acc;
    std::optional<double> pi_acc;
    std::string summary;
};
EvalOutcome run_eval(const RunConfig& cfg, const std::filesystem::path& pred_dir, std::ostream& log);

struct BenchReport {
    std::vector<double> forward_ms;
    std::vector<double> decode_ms;
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double stddev_ms = 0.0;
    double mean_fps = 0.0;
    double median_fps = 0.0;
    double reduction_ratio = 0.0;
};
BenchReport run_bench(const RunConfig& cfg, std::ostream& log);

void run_viz(const RunConfig& cfg, int limit, std::ostream& log);

}  // namespace ufatd
