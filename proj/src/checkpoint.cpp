#include "ufatd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <string_view>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ufatd/error.hpp"
#include "ufatd/fileutil.hpp"

namespace ufatd {

namespace {

constexpr std::string_view kMagic = "UFATD1";

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <class U>
    void uint(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
    bool done() const { return pos_ == b_.size(); }
    std::size_t pos() const { return pos_; }
    const std::uint8_t* take(std::size_t n, std::string_view what) {
        if (b_.size() - pos_ < n) {
            fail(ErrorKind::Format, fmt::format("checkpoint truncated at byte {} while reading {}", pos_, what));
        }
        const std::uint8_t* p = b_.data() + pos_;
        pos_ += n;
        return p;
    }
    template <class U>
    U uint(std::string_view what) {
        const std::uint8_t* p = take(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
        return v;
    }
    double f64(std::string_view what) { return std::bit_cast<double>(uint<std::uint64_t>(what)); }

private:
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

void write_config(Writer& w, const ModelConfig& c) {
    w.uint<std::uint32_t>(c.channels);
    w.uint<std::uint32_t>(c.in_h);
    w.uint<std::uint32_t>(c.in_w);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.stages.size()));
    for (const StageConfig& s : c.stages) {
        w.uint<std::uint32_t>(s.kernel);
        w.uint<std::uint32_t>(s.stride);
        w.uint<std::uint32_t>(s.out_channels);
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(s.activation));
        w.uint<std::uint32_t>(s.pool ? 1 : 0);
    }
    w.uint<std::uint32_t>(c.feature_dim);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.feature_activation));
    w.uint<std::uint32_t>(c.C);
    w.uint<std::uint32_t>(c.h);
    w.uint<std::uint32_t>(c.w);
    w.uint<std::uint32_t>(c.n);
}

int read_int(Reader& r, std::string_view what) {
    const std::uint32_t v = r.uint<std::uint32_t>(what);
    if (v > 1u << 24) fail(ErrorKind::Format, fmt::format("checkpoint field {} out of range: {}", what, v));
    return static_cast<int>(v);
}

Activation read_activation(Reader& r, std::string_view what) {
    const std::uint32_t v = r.uint<std::uint32_t>(what);
    if (v > 1) fail(ErrorKind::Format, fmt::format("checkpoint field {}: unknown activation {}", what, v));
    return static_cast<Activation>(v);
}

ModelConfig read_config(Reader& r) {
    ModelConfig c;
    c.channels = read_int(r, "channels");
    c.in_h = read_int(r, "in_h");
    c.in_w = read_int(r, "in_w");
    const int stages = read_int(r, "stage count");
    if (stages > 64) fail(ErrorKind::Format, fmt::format("checkpoint stage count {} is implausible", stages));
    c.stages.assign(static_cast<std::size_t>(stages), StageConfig{});
    for (StageConfig& s : c.stages) {
        s.kernel = read_int(r, "stage kernel");
        s.stride = read_int(r, "stage stride");
        s.out_channels = read_int(r, "stage out_channels");
        s.activation = read_activation(r, "stage activation");
        s.pool = read_int(r, "stage pool") != 0;
    }
    c.feature_dim = read_int(r, "feature_dim");
    c.feature_activation = read_activation(r, "feature_activation");
    c.C = read_int(r, "C");
    c.h = read_int(r, "h");
    c.w = read_int(r, "w");
    c.n = read_int(r, "n");
    return c;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const ModelConfig& cfg, const ModelParams& params) {
    Writer w;
    w.bytes(kMagic.data(), kMagic.size());
    w.uint<std::uint16_t>(kCheckpointVersion);
    write_config(w, cfg);
    for (const Param& p : params.tensors) {
        if (p.name.size() > 0xffff) fail(ErrorKind::Input, "parameter name too long");
        w.uint<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
        w.bytes(p.name.data(), p.name.size());
        w.uint<std::uint8_t>(static_cast<std::uint8_t>(p.value.shape.size()));
        for (int d : p.value.shape) w.uint<std::uint32_t>(static_cast<std::uint32_t>(d));
        for (double v : p.value.data) w.f64(v);
    }
    return w.take();
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    const std::uint8_t* magic = r.take(kMagic.size(), "magic");
    if (std::memcmp(magic, kMagic.data(), kMagic.size()) != 0) {
        fail(ErrorKind::Format, "not a checkpoint: bad magic at byte 0");
    }
    const std::uint16_t version = r.uint<std::uint16_t>("version");
    if (version != kCheckpointVersion) {
        fail(ErrorKind::Format, fmt::format("checkpoint version {} needs upgrading to version {}", version,
                                            kCheckpointVersion));
    }
    Checkpoint ck;
    ck.config = read_config(r);
    validate(ck.config);
    ck.params = Model(ck.config, kernels::Backend::Reference).init(0);

    std::size_t expected = 0;
    while (!r.done()) {
        const std::size_t at = r.pos();
        const std::uint16_t len = r.uint<std::uint16_t>("name length");
        const std::uint8_t* name_bytes = r.take(len, "name");
        const std::string name(reinterpret_cast<const char*>(name_bytes), len);
        if (expected >= ck.params.tensors.size() || ck.params.tensors[expected].name != name) {
            fail(ErrorKind::Format, fmt::format("unexpected parameter '{}' at byte {}", name, at));
        }
        Tensor& t = ck.params.tensors[expected].value;
        const std::uint8_t rank = r.uint<std::uint8_t>("rank");
        std::vector<int> shape(rank);
        for (int& d : shape) d = read_int(r, "dim");
        if (shape != t.shape) {
            fail(ErrorKind::Format, fmt::format("parameter '{}' has shape [{}], expected [{}]", name,
                                                fmt::join(shape, ","), fmt::join(t.shape, ",")));
        }
        for (double& v : t.data) v = r.f64(name);
        ++expected;
    }
    if (expected != ck.params.tensors.size()) {
        fail(ErrorKind::Format, fmt::format("checkpoint truncated: {} of {} parameters present", expected,
                                            ck.params.tensors.size()));
    }
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams& params) {
    atomic_write(path, serialize_checkpoint(cfg, params));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return deserialize_checkpoint(read_bytes(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Io) throw;
        throw Error(e.kind(), fmt::format("{}: {}", path.string(), e.what()));
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
    Checkpoint ck = load_checkpoint(path);
    const auto diff = config_diff(expected, ck.config);
    if (!diff.empty()) {
        fail(ErrorKind::Config,
             fmt::format("{}: checkpoint config differs in: {}", path.string(), fmt::join(diff, ", ")));
    }
    return ck;
}

void check_consistency(const ModelConfig& cfg, const AnchorSet& anchors) {
    if (anchors.h() != cfg.h || anchors.n() != cfg.n) {
        fail(ErrorKind::Config, fmt::format("anchors file has h={}, n={} but the model has h={}, n={}", anchors.h(),
                                            anchors.n(), cfg.h, cfg.n));
    }
}

}  // namespace ufatd
