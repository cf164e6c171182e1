#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "ufatd/anchors.hpp"
#include "ufatd/formats.hpp"
#include "ufatd/model.hpp"
#include "ufatd/train.hpp"

namespace ufatd {

struct LoadedSplit {
    std::vector<IndexEntry> entries;
    std::vector<Example> examples;
    int native_w = 0;
    int native_h = 0;
};

/// Reads every image/label pair of an index file, resamples images to the
/// model input and encodes grid targets against `anchors`.
LoadedSplit load_split(const std::filesystem::path& index, const ModelConfig& cfg, const AnchorSet& anchors);

/// Label corpus of an index (no images).
std::vector<std::vector<Polyline>> load_labels(const std::filesystem::path& index);

}  // namespace ufatd
