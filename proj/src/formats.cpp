#include "ufatd/formats.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "ufatd/error.hpp"
#include "ufatd/fileutil.hpp"

namespace ufatd {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= line.size()) {
        std::size_t end = line.find(sep, start);
        if (end == std::string_view::npos) end = line.size();
        out.push_back(line.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

std::vector<std::string_view> fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::vector<std::string_view> lines(std::string_view text) {
    auto out = split(text, '\n');
    if (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

template <typename T>
T parse_number(std::string_view field, std::string_view source, std::size_t line_no) {
    T value{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        fail(ErrorKind::Format, fmt::format("{}:{}: bad number '{}'", source, line_no, field));
    }
    return value;
}

}  // namespace

std::string format_labels(const std::vector<Polyline>& tracks) {
    std::string out;
    for (const auto& t : tracks) {
        out += fmt::format("{}", t.track_index);
        for (const auto& v : t.vertices) out += fmt::format(" {:.3f} {:.3f}", v.x, v.y);
        out += '\n';
    }
    return out;
}

std::vector<Polyline> parse_labels(std::string_view text, std::string_view source) {
    std::vector<Polyline> tracks;
    std::set<int> seen;
    std::size_t line_no = 0;
    for (auto line : lines(text)) {
        ++line_no;
        auto f = fields(line);
        if (f.empty()) continue;
        if (f.size() % 2 == 0) {
            fail(ErrorKind::Format, fmt::format("{}:{}: expected track index followed by x y pairs", source, line_no));
        }
        Polyline p;
        p.track_index = parse_number<int>(f[0], source, line_no);
        if (p.track_index < 0 || !seen.insert(p.track_index).second) {
            fail(ErrorKind::Format, fmt::format("{}:{}: invalid or duplicate track index {}", source, line_no,
                                                p.track_index));
        }
        for (std::size_t i = 1; i < f.size(); i += 2) {
            Point v{parse_number<double>(f[i], source, line_no), parse_number<double>(f[i + 1], source, line_no)};
            if (!p.vertices.empty() && !(v.y > p.vertices.back().y)) {
                fail(ErrorKind::Format, fmt::format("{}:{}: y values must be strictly increasing", source, line_no));
            }
            p.vertices.push_back(v);
        }
        if (p.vertices.size() < 2) {
            fail(ErrorKind::Format, fmt::format("{}:{}: a track needs at least 2 vertices", source, line_no));
        }
        tracks.push_back(std::move(p));
    }
    return tracks;
}

std::vector<Polyline> read_labels(const std::filesystem::path& path) {
    return parse_labels(read_text(path), path.string());
}

void write_labels(const std::filesystem::path& path, const std::vector<Polyline>& tracks) {
    atomic_write(path, format_labels(tracks));
}

std::vector<IndexEntry> read_index(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    const auto base = path.parent_path();
    std::vector<IndexEntry> entries;
    std::set<std::filesystem::path> images;
    std::size_t line_no = 0;
    for (auto line : lines(text)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        auto f = split(line, '\t');
        if (f.size() != 3) fail(ErrorKind::Format, fmt::format("{}:{}: expected 3 tab-separated fields", path.string(), line_no));
        IndexEntry e;
        e.image = base / std::filesystem::path(f[0]);
        e.label = base / std::filesystem::path(f[1]);
        e.perspective_class = parse_number<int>(f[2], path.string(), line_no);
        if (e.perspective_class < 0) fail(ErrorKind::Format, fmt::format("{}:{}: negative class", path.string(), line_no));
        if (!images.insert(e.image).second) {
            fail(ErrorKind::Format, fmt::format("{}:{}: duplicate image path {}", path.string(), line_no, f[0]));
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_index(const std::filesystem::path& path, const std::vector<IndexEntry>& entries) {
    const auto base = path.parent_path();
    auto rel = [&](const std::filesystem::path& p) {
        return p.is_relative() ? p.generic_string() : std::filesystem::relative(p, base).generic_string();
    };
    std::string out;
    for (const auto& e : entries) out += fmt::format("{}\t{}\t{}\n", rel(e.image), rel(e.label), e.perspective_class);
    atomic_write(path, out);
}

std::string format_anchors(const AnchorSet& set) {
    const auto& s = set.spec;
    std::string out = fmt::format("{} {} {:.6f} {:.6f} {:.6f}\n", s.h, s.n, s.h_anchor, s.y_min, s.y_max);
    for (const auto& g : set.groups) {
        for (int j = 0; j < s.h; ++j) out += fmt::format("{}{:.6f}", j ? " " : "", g.rows[j]);
        out += '\n';
    }
    return out;
}

AnchorSet parse_anchors(std::string_view text, std::string_view source) {
    auto ls = lines(text);
    if (ls.empty()) fail(ErrorKind::Format, fmt::format("{}: empty anchor file", source));
    auto head = fields(ls[0]);
    if (head.size() != 5) fail(ErrorKind::Format, fmt::format("{}:1: expected `h n H_anchor y_min y_max`", source));
    AnchorSet set;
    set.spec.h = parse_number<int>(head[0], source, 1);
    set.spec.n = parse_number<int>(head[1], source, 1);
    set.spec.h_anchor = parse_number<double>(head[2], source, 1);
    set.spec.y_min = parse_number<double>(head[3], source, 1);
    set.spec.y_max = parse_number<double>(head[4], source, 1);
    try {
        validate(set.spec);
    } catch (const Error& e) {
        fail(ErrorKind::Format, fmt::format("{}:1: {}", source, e.what()));
    }
    if (ls.size() != static_cast<std::size_t>(set.spec.n) + 1) {
        fail(ErrorKind::Format, fmt::format("{}: expected {} group lines, found {}", source, set.spec.n, ls.size() - 1));
    }
    bool equidistant = true;
    for (int k = 0; k < set.spec.n; ++k) {
        auto f = fields(ls[k + 1]);
        if (f.size() != static_cast<std::size_t>(set.spec.h)) {
            fail(ErrorKind::Format, fmt::format("{}:{}: expected {} rows", source, k + 2, set.spec.h));
        }
        AnchorGroup g;
        g.k = k;
        for (auto v : f) g.rows.push_back(parse_number<double>(v, source, k + 2));
        for (int j = 1; j < set.spec.h; ++j) {
            if (!(g.rows[j] > g.rows[j - 1])) {
                fail(ErrorKind::Format, fmt::format("{}:{}: rows must be strictly increasing", source, k + 2));
            }
        }
        g.start = g.rows.front();
        const double gap = (g.rows.back() - g.rows.front()) / (set.spec.h - 1);
        for (int j = 0; j < set.spec.h; ++j) {
            if (std::abs(g.rows[j] - (g.start + j * gap)) > 2e-6) equidistant = false;
        }
        set.groups.push_back(std::move(g));
    }
    set.spacing = equidistant ? AnchorSpacing::Equidistant : AnchorSpacing::Nonuniform;
    return set;
}

AnchorSet read_anchors(const std::filesystem::path& path) { return parse_anchors(read_text(path), path.string()); }

void write_anchors(const std::filesystem::path& path, const AnchorSet& set) { atomic_write(path, format_anchors(set)); }

}  // namespace ufatd
