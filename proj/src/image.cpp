#include "ufatd/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "ufatd/error.hpp"
#include "ufatd/fileutil.hpp"

namespace ufatd {

namespace {

class HeaderReader {
public:
    explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    int next_int() {
        skip_space_and_comments();
        const std::size_t start = pos_;
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000) fail(ErrorKind::Format, fmt::format("header value too large at offset {}", start));
            ++pos_;
        }
        if (pos_ == start) fail(ErrorKind::Format, fmt::format("expected integer at offset {}", start));
        return static_cast<int>(value);
    }

    // Exactly one whitespace byte separates maxval from the raster.
    void single_space() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            fail(ErrorKind::Format, fmt::format("expected whitespace after maxval at offset {}", pos_));
        }
        ++pos_;
    }

    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

Raster decode_pnm(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        fail(ErrorKind::Format, "bad magic at offset 0 (expected P5 or P6)");
    }
    const int channels = bytes[1] == '5' ? 1 : 3;
    HeaderReader r(bytes);
    r.advance(2);
    const int width = r.next_int();
    const int height = r.next_int();
    const std::size_t maxval_at = r.pos();
    const int maxval = r.next_int();
    if (maxval != 255) fail(ErrorKind::Format, fmt::format("unsupported maxval {} near offset {}", maxval, maxval_at));
    if (width <= 0 || height <= 0) fail(ErrorKind::Format, "zero image dimension");
    r.single_space();
    Raster img(width, height, channels);
    if (bytes.size() - r.pos() < img.pixels.size()) {
        fail(ErrorKind::Format, fmt::format("truncated raster at offset {}: need {} bytes, have {}", r.pos(),
                                            img.pixels.size(), bytes.size() - r.pos()));
    }
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos()), img.pixels.size(), img.pixels.begin());
    return img;
}

Raster read_pnm(const std::filesystem::path& path) {
    try {
        return decode_pnm(read_bytes(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Format) fail(ErrorKind::Format, path.string() + ": " + e.what());
        throw;
    }
}

std::vector<std::uint8_t> encode_pnm(const Raster& image) {
    if (image.channels != 1 && image.channels != 3) fail(ErrorKind::Input, "PNM supports 1 or 3 channels");
    const std::string header = fmt::format("P{}\n{} {}\n255\n", image.channels == 1 ? 5 : 6, image.width, image.height);
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), image.pixels.begin(), image.pixels.end());
    return out;
}

void write_pnm(const std::filesystem::path& path, const Raster& image) { atomic_write(path, encode_pnm(image)); }

Raster to_rgb(const Raster& image) {
    if (image.channels == 3) return image;
    Raster rgb(image.width, image.height, 3);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        rgb.pixels[3 * i] = rgb.pixels[3 * i + 1] = rgb.pixels[3 * i + 2] = image.pixels[i];
    }
    return rgb;
}

std::vector<double> to_model_input(const Raster& image, int out_w, int out_h, int channels) {
    if (channels != 1 && channels != 3) fail(ErrorKind::Config, "model input must have 1 or 3 channels");
    const double sx = static_cast<double>(image.width) / out_w;
    const double sy = static_cast<double>(image.height) / out_h;
    std::vector<double> out(static_cast<std::size_t>(channels) * out_h * out_w);

    // Each output pixel averages the source area it covers, with fractional edge weights.
    auto span_weights = [](double lo, double hi, int limit) {
        std::vector<std::pair<int, double>> w;
        for (int p = static_cast<int>(std::floor(lo)); p < hi && p < limit; ++p) {
            const double a = std::max(lo, static_cast<double>(p));
            const double b = std::min(hi, static_cast<double>(p + 1));
            if (b > a) w.emplace_back(p, b - a);
        }
        return w;
    };

    auto intensity = [&](int x, int y, int c) -> double {
        if (image.channels == channels) return image.at(x, y, c);
        if (image.channels == 1) return image.at(x, y, 0);
        return (image.at(x, y, 0) + image.at(x, y, 1) + image.at(x, y, 2)) / 3.0;
    };

    for (int oy = 0; oy < out_h; ++oy) {
        const auto wy = span_weights(oy * sy, (oy + 1) * sy, image.height);
        for (int ox = 0; ox < out_w; ++ox) {
            const auto wx = span_weights(ox * sx, (ox + 1) * sx, image.width);
            for (int c = 0; c < channels; ++c) {
                double sum = 0.0, area = 0.0;
                for (auto [py, fy] : wy) {
                    for (auto [px, fx] : wx) {
                        sum += fy * fx * intensity(px, py, c);
                        area += fy * fx;
                    }
                }
                out[(static_cast<std::size_t>(c) * out_h + oy) * out_w + ox] = sum / area / 127.5 - 1.0;
            }
        }
    }
    return out;
}

}  // namespace ufatd
