#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ufatd/anchors.hpp"
#include "ufatd/polyline.hpp"

namespace ufatd {

// Label file: one line per visible track, `track_index x0 y0 x1 y1 ...`,
// three fractional digits, y ascending. An empty file means no tracks.
std::string format_labels(const std::vector<Polyline>& tracks);
std::vector<Polyline> parse_labels(std::string_view text, std::string_view source = "<labels>");
std::vector<Polyline> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<Polyline>& tracks);

struct IndexEntry {
    std::filesystem::path image;  // resolved against the index file's directory on read
    std::filesystem::path label;
    int perspective_class = 0;
};

// Dataset index: `image_path<TAB>label_path<TAB>perspective_class` per line.
// Relative paths are stored relative to the index file.
std::vector<IndexEntry> read_index(const std::filesystem::path& path);
void write_index(const std::filesystem::path& path, const std::vector<IndexEntry>& entries);

// Anchor file: `h n H_anchor y_min y_max`, then n lines of h rows (6 fractional digits).
std::string format_anchors(const AnchorSet& set);
AnchorSet parse_anchors(std::string_view text, std::string_view source = "<anchors>");
AnchorSet read_anchors(const std::filesystem::path& path);
void write_anchors(const std::filesystem::path& path, const AnchorSet& set);

}  // namespace ufatd
