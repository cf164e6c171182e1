#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ufatd/anchors.hpp"
#include "ufatd/codec.hpp"
#include "ufatd/eval.hpp"
#include "ufatd/model.hpp"
#include "ufatd/synth.hpp"
#include "ufatd/train.hpp"

namespace ufatd {

struct RunPaths {
    std::filesystem::path dataset = "data";
    std::filesystem::path anchors = "data/anchors.txt";
    std::filesystem::path checkpoint = "run/model.ckpt";
    std::filesystem::path output = "run";
};

struct AnchorOptions {
    double h_anchor_fraction = 0.98;
    AnchorSpacing spacing = AnchorSpacing::Nonuniform;
};

struct SynthOptions {
    SceneSpec scene;
    int count = 900;
    DatasetSplit split{0.1428571, 0.2222222};
};

struct BenchOptions {
    int iterations = 1000;
    int warmup = 10;
    int threads = 1;
};

struct RunConfig {
    RunPaths paths;
    AnchorOptions anchors;
    SynthOptions synth;
    ModelConfig model;
    TrainSchedule train;
    DecodeMode decode = DecodeMode::Argmax;
    EvalConfig eval;
    double acc_tolerance = 0.0;  // pixels; <= 0 means half a grid cell
    std::string split = "test";  // index consumed by infer/eval/viz
    BenchOptions bench;
};

/// Every key in echo order.
std::vector<std::string> config_keys();

void set_key(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_key(const RunConfig& cfg, std::string_view key);

/// `key = value` lines; '#' starts a comment. Relative paths stay relative to the working directory.
void apply_config_text(RunConfig& cfg, std::string_view text, std::string_view source = "<config>");
void apply_override(RunConfig& cfg, std::string_view assignment);

RunConfig load_run_config(const std::filesystem::path* file, const std::vector<std::string>& overrides);

/// Reloadable dump of every effective value, defaults included.
std::string echo_config(const RunConfig& cfg);

void validate(const RunConfig& cfg);

std::string format_stages(const std::vector<StageConfig>& stages);
std::vector<StageConfig> parse_stages(std::string_view text);

}  // namespace ufatd
