#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ufatd {

/// Writes to `<path>.tmp` and renames over `path`, so readers never see partial files.
void atomic_write(const std::filesystem::path& path, const std::string& contents);
void atomic_write(const std::filesystem::path& path, const std::vector<std::uint8_t>& contents);

std::string read_text(const std::filesystem::path& path);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

}  // namespace ufatd
