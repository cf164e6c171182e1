#include "ufatd/dataset.hpp"

#include <exception>

#include <fmt/format.h>

#include "ufatd/codec.hpp"
#include "ufatd/error.hpp"
#include "ufatd/image.hpp"

namespace ufatd {

LoadedSplit load_split(const std::filesystem::path& index, const ModelConfig& cfg, const AnchorSet& anchors) {
    if (anchors.h() != cfg.h || anchors.n() != cfg.n) {
        fail(ErrorKind::Input, fmt::format("anchors (h={}, n={}) do not match model (h={}, n={})", anchors.h(),
                                           anchors.n(), cfg.h, cfg.n));
    }
    LoadedSplit split;
    split.entries = read_index(index);
    const long count = static_cast<long>(split.entries.size());
    split.examples.resize(split.entries.size());
    std::vector<int> widths(split.entries.size()), heights(split.entries.size());
    std::vector<std::exception_ptr> errors(split.entries.size());

#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < count; ++i) {
        try {
            const IndexEntry& e = split.entries[i];
            const Raster img = read_pnm(e.image);
            std::vector<Polyline> tracks = read_labels(e.label);
            for (const Polyline& p : tracks) validate(p, img.width);
            Example& ex = split.examples[i];
            ex.input = to_model_input(img, cfg.in_w, cfg.in_h, cfg.channels);
            ex.target = encode(tracks, anchors, img.width, cfg.w, cfg.C);
            ex.tracks = std::move(tracks);
            widths[i] = img.width;
            heights[i] = img.height;
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
    if (count > 0) {
        split.native_w = widths[0];
        split.native_h = heights[0];
        for (long i = 1; i < count; ++i) {
            if (widths[i] != split.native_w || heights[i] != split.native_h) {
                fail(ErrorKind::Input, fmt::format("{}: image size differs from the rest of the split",
                                                   split.entries[i].image.string()));
            }
        }
    }
    return split;
}

std::vector<std::vector<Polyline>> load_labels(const std::filesystem::path& index) {
    std::vector<std::vector<Polyline>> out;
    for (const IndexEntry& e : read_index(index)) out.push_back(read_labels(e.label));
    return out;
}

}  // namespace ufatd
