#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ufatd {

/// 8-bit raster, 1 (PGM) or 3 (PPM) interleaved channels, row-major.
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;

    Raster() = default;
    Raster(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {}

    std::uint8_t& at(int x, int y, int c = 0) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool operator==(const Raster&) const = default;
};

/// Binary P5/P6 with maxval 255. Errors report the byte offset of the problem.
Raster read_pnm(const std::filesystem::path& path);
Raster decode_pnm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pnm(const Raster& image);
void write_pnm(const std::filesystem::path& path, const Raster& image);

Raster to_rgb(const Raster& image);

/// Area-averaged resample to out_w x out_h; returns planar [channels][out_h][out_w]
/// values scaled to [-1, 1]. Grayscale is replicated when channels == 3.
std::vector<double> to_model_input(const Raster& image, int out_w, int out_h, int channels);

}  // namespace ufatd
