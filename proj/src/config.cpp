#include "ufatd/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <limits>

#include <fmt/format.h>

#include "ufatd/error.hpp"
#include "ufatd/fileutil.hpp"

namespace ufatd {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    fail(ErrorKind::Config, fmt::format("{}: '{}' is not {}", key, value, expected));
}

template <class T>
T parse_number(std::string_view key, std::string_view v, std::string_view expected) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, v, expected);
    return out;
}

int parse_int(std::string_view key, std::string_view v) { return parse_number<int>(key, v, "an integer"); }

double parse_real(std::string_view key, std::string_view v) {
    const double d = parse_number<double>(key, v, "a number");
    if (!std::isfinite(d)) bad_value(key, v, "a finite number");
    return d;
}

std::string real(double v) { return fmt::format("{}", v); }

struct Key {
    std::string name;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

template <class T>
using Field = T& (*)(RunConfig&);

template <class T>
const T& read(Field<T> f, const RunConfig& c) {
    return f(const_cast<RunConfig&>(c));
}

Key int_key(std::string name, Field<int> f) {
    return {name, [f](const RunConfig& c) { return std::to_string(read(f, c)); },
            [f, name](RunConfig& c, std::string_view v) { f(c) = parse_int(name, v); }};
}

Key real_key(std::string name, Field<double> f) {
    return {name, [f](const RunConfig& c) { return real(read(f, c)); },
            [f, name](RunConfig& c, std::string_view v) { f(c) = parse_real(name, v); }};
}

Key path_key(std::string name, Field<std::filesystem::path> f) {
    return {name, [f](const RunConfig& c) { return read(f, c).generic_string(); },
            [f](RunConfig& c, std::string_view v) { f(c) = std::filesystem::path(v); }};
}

Key seed_key(std::string name, Field<std::uint64_t> f) {
    return {name, [f](const RunConfig& c) { return std::to_string(read(f, c)); },
            [f, name](RunConfig& c, std::string_view v) {
                f(c) = parse_number<std::uint64_t>(name, v, "an unsigned integer");
            }};
}

std::string activation_name(Activation a) { return a == Activation::Relu ? "relu" : "identity"; }

Activation parse_activation(std::string_view key, std::string_view v) {
    if (v == "relu") return Activation::Relu;
    if (v == "identity") return Activation::Identity;
    bad_value(key, v, "relu or identity");
}

const std::vector<Key>& keys() {
    static const std::vector<Key> table{
        seed_key("seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }),
        path_key("paths.dataset", [](RunConfig& c) -> std::filesystem::path& { return c.paths.dataset; }),
        path_key("paths.anchors", [](RunConfig& c) -> std::filesystem::path& { return c.paths.anchors; }),
        path_key("paths.checkpoint", [](RunConfig& c) -> std::filesystem::path& { return c.paths.checkpoint; }),
        path_key("paths.output", [](RunConfig& c) -> std::filesystem::path& { return c.paths.output; }),
        Key{"split", [](const RunConfig& c) { return c.split; },
            [](RunConfig& c, std::string_view v) {
                if (v != "train" && v != "val" && v != "test") bad_value("split", v, "train, val or test");
                c.split = std::string(v);
            }},
        real_key("anchors.h_anchor_fraction", [](RunConfig& c) -> double& { return c.anchors.h_anchor_fraction; }),
        Key{"anchors.spacing",
            [](const RunConfig& c) {
                return std::string(c.anchors.spacing == AnchorSpacing::Nonuniform ? "nonuniform" : "equidistant");
            },
            [](RunConfig& c, std::string_view v) {
                if (v == "nonuniform") c.anchors.spacing = AnchorSpacing::Nonuniform;
                else if (v == "equidistant") c.anchors.spacing = AnchorSpacing::Equidistant;
                else bad_value("anchors.spacing", v, "nonuniform or equidistant");
            }},
        int_key("synth.W", [](RunConfig& c) -> int& { return c.synth.scene.W; }),
        int_key("synth.H", [](RunConfig& c) -> int& { return c.synth.scene.H; }),
        int_key("synth.n_classes", [](RunConfig& c) -> int& { return c.synth.scene.n_classes; }),
        real_key("synth.gauge_bottom", [](RunConfig& c) -> double& { return c.synth.scene.gauge_bottom; }),
        real_key("synth.gauge_jitter", [](RunConfig& c) -> double& { return c.synth.scene.gauge_jitter; }),
        real_key("synth.curvature_range", [](RunConfig& c) -> double& { return c.synth.scene.curvature_range; }),
        real_key("synth.noise_sigma", [](RunConfig& c) -> double& { return c.synth.scene.noise_sigma; }),
        real_key("synth.line_width", [](RunConfig& c) -> double& { return c.synth.scene.line_width; }),
        seed_key("synth.seed", [](RunConfig& c) -> std::uint64_t& { return c.synth.scene.seed; }),
        int_key("synth.count", [](RunConfig& c) -> int& { return c.synth.count; }),
        real_key("synth.val_fraction", [](RunConfig& c) -> double& { return c.synth.split.val_fraction; }),
        real_key("synth.test_fraction", [](RunConfig& c) -> double& { return c.synth.split.test_fraction; }),
        int_key("model.channels", [](RunConfig& c) -> int& { return c.model.channels; }),
        int_key("model.in_h", [](RunConfig& c) -> int& { return c.model.in_h; }),
        int_key("model.in_w", [](RunConfig& c) -> int& { return c.model.in_w; }),
        Key{"model.stages", [](const RunConfig& c) { return format_stages(c.model.stages); },
            [](RunConfig& c, std::string_view v) { c.model.stages = parse_stages(v); }},
        int_key("model.feature_dim", [](RunConfig& c) -> int& { return c.model.feature_dim; }),
        Key{"model.feature_activation", [](const RunConfig& c) { return activation_name(c.model.feature_activation); },
            [](RunConfig& c, std::string_view v) {
                c.model.feature_activation = parse_activation("model.feature_activation", v);
            }},
        int_key("model.C", [](RunConfig& c) -> int& { return c.model.C; }),
        int_key("model.h", [](RunConfig& c) -> int& { return c.model.h; }),
        int_key("model.w", [](RunConfig& c) -> int& { return c.model.w; }),
        int_key("model.n", [](RunConfig& c) -> int& { return c.model.n; }),
        int_key("train.epochs", [](RunConfig& c) -> int& { return c.train.epochs; }),
        int_key("train.batch", [](RunConfig& c) -> int& { return c.train.batch; }),
        real_key("train.lr_backbone", [](RunConfig& c) -> double& { return c.train.base_lr[0]; }),
        real_key("train.lr_hcl", [](RunConfig& c) -> double& { return c.train.base_lr[1]; }),
        real_key("train.lr_pi", [](RunConfig& c) -> double& { return c.train.base_lr[2]; }),
        real_key("train.unfreeze_backbone_fraction", [](RunConfig& c) -> double& { return c.train.unfreeze_backbone_fraction; }),
        real_key("train.unfreeze_pi_fraction", [](RunConfig& c) -> double& { return c.train.unfreeze_pi_fraction; }),
        real_key("train.lambda", [](RunConfig& c) -> double& { return c.train.lambda; }),
        real_key("train.adam_beta1", [](RunConfig& c) -> double& { return c.train.adam.beta1; }),
        real_key("train.adam_beta2", [](RunConfig& c) -> double& { return c.train.adam.beta2; }),
        real_key("train.adam_eps", [](RunConfig& c) -> double& { return c.train.adam.eps; }),
        Key{"decode", [](const RunConfig& c) {
                return std::string(c.decode == DecodeMode::Argmax ? "argmax" : "expectation");
            },
            [](RunConfig& c, std::string_view v) {
                if (v == "argmax") c.decode = DecodeMode::Argmax;
                else if (v == "expectation") c.decode = DecodeMode::Expectation;
                else bad_value("decode", v, "argmax or expectation");
            }},
        int_key("eval.width", [](RunConfig& c) -> int& { return c.eval.width; }),
        int_key("eval.height", [](RunConfig& c) -> int& { return c.eval.height; }),
        real_key("eval.line_width", [](RunConfig& c) -> double& { return c.eval.line_width; }),
        Key{"eval.matching",
            [](const RunConfig& c) { return std::string(c.eval.matching == MatchMode::Greedy ? "greedy" : "optimal"); },
            [](RunConfig& c, std::string_view v) {
                if (v == "greedy") c.eval.matching = MatchMode::Greedy;
                else if (v == "optimal") c.eval.matching = MatchMode::Optimal;
                else bad_value("eval.matching", v, "greedy or optimal");
            }},
        real_key("eval.acc_tolerance", [](RunConfig& c) -> double& { return c.acc_tolerance; }),
        int_key("bench.iterations", [](RunConfig& c) -> int& { return c.bench.iterations; }),
        int_key("bench.warmup", [](RunConfig& c) -> int& { return c.bench.warmup; }),
        int_key("bench.threads", [](RunConfig& c) -> int& { return c.bench.threads; }),
    };
    return table;
}


const Key& find_key(std::string_view name) {
    for (const Key& k : keys())
        if (k.name == name) return k;
    fail(ErrorKind::Config, fmt::format("unknown config key '{}'", name));
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const Key& k : keys()) out.push_back(k.name);
    return out;
}

void set_key(RunConfig& cfg, std::string_view key, std::string_view value) { find_key(key).set(cfg, trim(value)); }

std::string get_key(const RunConfig& cfg, std::string_view key) { return find_key(key).get(cfg); }

void apply_config_text(RunConfig& cfg, std::string_view text, std::string_view source) {
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            fail(ErrorKind::Config, fmt::format("{}:{}: expected 'key = value'", source, line_no));
        }
        try {
            set_key(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const Error& e) {
            throw Error(e.kind(), fmt::format("{}:{}: {}", source, line_no, e.what()));
        }
    }
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        fail(ErrorKind::Config, fmt::format("--set expects key=value, got '{}'", assignment));
    }
    set_key(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

RunConfig load_run_config(const std::filesystem::path* file, const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (file) apply_config_text(cfg, read_text(*file), file->string());
    for (const std::string& o : overrides) apply_override(cfg, o);
    validate(cfg);
    return cfg;
}

std::string echo_config(const RunConfig& cfg) {
    std::string out;
    for (const Key& k : keys()) out += fmt::format("{} = {}\n", k.name, k.get(cfg));
    return out;
}

void validate(const RunConfig& cfg) {
    validate(cfg.model);
    validate(cfg.train);
    validate(cfg.eval);
    validate(cfg.synth.scene);
    if (cfg.synth.count <= 0) fail(ErrorKind::Config, "synth.count must be positive");
    if (!(cfg.anchors.h_anchor_fraction > 0.0 && cfg.anchors.h_anchor_fraction <= 1.0)) {
        fail(ErrorKind::Config, "anchors.h_anchor_fraction must lie in (0, 1]");
    }
    if (cfg.bench.iterations < 10 || cfg.bench.warmup < 0 || cfg.bench.threads <= 0) {
        fail(ErrorKind::Config, "bench.iterations must be at least 10, bench.threads positive, bench.warmup >= 0");
    }
}

std::string format_stages(const std::vector<StageConfig>& stages) {
    std::string out;
    for (const StageConfig& s : stages) {
        if (!out.empty()) out += ',';
        out += fmt::format("{}x{}x{}", s.kernel, s.stride, s.out_channels);
        if (s.activation == Activation::Identity) out += "+identity";
        if (s.pool) out += "+pool";
    }
    return out;
}

std::vector<StageConfig> parse_stages(std::string_view text) {
    std::vector<StageConfig> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        std::string_view item = trim(text.substr(0, comma));
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
        StageConfig s;
        std::string_view dims = item.substr(0, item.find('+'));
        std::string_view flags = item.substr(dims.size());
        int* fields[3] = {&s.kernel, &s.stride, &s.out_channels};
        for (int i = 0; i < 3; ++i) {
            const auto x = dims.find('x');
            if ((i < 2) == (x == std::string_view::npos)) bad_value("model.stages", item, "KxSxC[+pool][+identity]");
            *fields[i] = parse_int("model.stages", dims.substr(0, x));
            dims = x == std::string_view::npos ? std::string_view{} : dims.substr(x + 1);
        }
        while (!flags.empty()) {
            flags.remove_prefix(1);
            const std::string_view flag = flags.substr(0, flags.find('+'));
            flags.remove_prefix(flag.size());
            if (flag == "pool") s.pool = true;
            else if (flag == "identity") s.activation = Activation::Identity;
            else bad_value("model.stages", item, "KxSxC[+pool][+identity]");
        }
        out.push_back(s);
    }
    if (out.empty()) bad_value("model.stages", text, "a non-empty stage list");
    return out;
}

}  // namespace ufatd
