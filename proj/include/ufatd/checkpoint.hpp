#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ufatd/anchors.hpp"
#include "ufatd/model.hpp"

namespace ufatd {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
};

std::vector<std::uint8_t> serialize_checkpoint(const ModelConfig& cfg, const ModelParams& params);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loads and requires the stored config to equal `expected`; Config error listing differing fields otherwise.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

/// Config error unless the anchors' h and n agree with the model.
void check_consistency(const ModelConfig& cfg, const AnchorSet& anchors);

}  // namespace ufatd
