#include "ufatd/model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ufatd/error.hpp"
#include "ufatd/rng.hpp"

namespace ufatd {

namespace {

using kernels::LinearShape;

struct KernelTable {
    decltype(&kernels::parallel::conv2d_forward) conv_forward;
    decltype(&kernels::parallel::conv2d_backward_input) conv_backward_input;
    decltype(&kernels::parallel::conv2d_backward_params) conv_backward_params;
    decltype(&kernels::parallel::linear_forward) linear_forward;
    decltype(&kernels::parallel::linear_backward_input) linear_backward_input;
    decltype(&kernels::parallel::linear_backward_params) linear_backward_params;
    decltype(&kernels::parallel::relu_forward) relu_forward;
    decltype(&kernels::parallel::relu_backward) relu_backward;
    decltype(&kernels::parallel::maxpool2_forward) maxpool_forward;
    decltype(&kernels::parallel::maxpool2_backward) maxpool_backward;
};

const KernelTable& kernel_table(kernels::Backend backend) {
    namespace p = kernels::parallel;
    namespace r = kernels::reference;
    static const KernelTable par{p::conv2d_forward,   p::conv2d_backward_input, p::conv2d_backward_params,
                                 p::linear_forward,   p::linear_backward_input, p::linear_backward_params,
                                 p::relu_forward,     p::relu_backward,         p::maxpool2_forward,
                                 p::maxpool2_backward};
    static const KernelTable ref{r::conv2d_forward,   r::conv2d_backward_input, r::conv2d_backward_params,
                                 r::linear_forward,   r::linear_backward_input, r::linear_backward_params,
                                 r::relu_forward,     r::relu_backward,         r::maxpool2_forward,
                                 r::maxpool2_backward};
    return backend == kernels::Backend::Reference ? ref : par;
}

// Parameter order: per stage (weight, bias), fc, hcl, pi.
std::size_t fc_index(const ModelConfig& cfg) { return 2 * cfg.stages.size(); }
std::size_t hcl_index(const ModelConfig& cfg) { return fc_index(cfg) + 2; }
std::size_t pi_index(const ModelConfig& cfg) { return fc_index(cfg) + 4; }

}  // namespace

int ModelConfig::flat_size() const {
    int c = channels, h_ = in_h, w_ = in_w;
    for (const auto& s : stages) {
        h_ = (h_ + 2 * (s.kernel / 2) - s.kernel) / s.stride + 1;
        w_ = (w_ + 2 * (s.kernel / 2) - s.kernel) / s.stride + 1;
        if (s.pool) {
            h_ /= 2;
            w_ /= 2;
        }
        c = s.out_channels;
    }
    return c * h_ * w_;
}

void validate(const ModelConfig& cfg) {
    if (cfg.channels <= 0 || cfg.in_h <= 0 || cfg.in_w <= 0) fail(ErrorKind::Config, "model input dims must be positive");
    if (cfg.C <= 0 || cfg.h < 2 || cfg.w <= 0 || cfg.n <= 0) fail(ErrorKind::Config, "model C, h, w, n must be positive (h >= 2)");
    if (cfg.feature_dim < cfg.n) fail(ErrorKind::Config, "model.feature_dim must be >= model.n");
    int h = cfg.in_h, w = cfg.in_w;
    for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
        const auto& s = cfg.stages[i];
        if (s.kernel <= 0 || s.kernel % 2 == 0 || s.stride <= 0 || s.out_channels <= 0) {
            fail(ErrorKind::Config, fmt::format("stage {}: kernel must be odd and positive, stride/channels positive", i));
        }
        h = (h + 2 * (s.kernel / 2) - s.kernel) / s.stride + 1;
        w = (w + 2 * (s.kernel / 2) - s.kernel) / s.stride + 1;
        if (s.pool) {
            h /= 2;
            w /= 2;
        }
        if (h <= 0 || w <= 0) fail(ErrorKind::Config, fmt::format("stage {} reduces the feature map to nothing", i));
    }
}

std::vector<std::string> config_diff(const ModelConfig& a, const ModelConfig& b) {
    std::vector<std::string> d;
    auto cmp = [&](const char* name, auto x, auto y) {
        if (x != y) d.push_back(fmt::format("{} ({} vs {})", name, x, y));
    };
    cmp("channels", a.channels, b.channels);
    cmp("in_h", a.in_h, b.in_h);
    cmp("in_w", a.in_w, b.in_w);
    cmp("feature_dim", a.feature_dim, b.feature_dim);
    cmp("feature_activation", static_cast<int>(a.feature_activation), static_cast<int>(b.feature_activation));
    cmp("C", a.C, b.C);
    cmp("h", a.h, b.h);
    cmp("w", a.w, b.w);
    cmp("n", a.n, b.n);
    cmp("stages", a.stages.size(), b.stages.size());
    for (std::size_t i = 0; i < std::min(a.stages.size(), b.stages.size()); ++i) {
        const auto& x = a.stages[i];
        const auto& y = b.stages[i];
        if (!(x == y)) d.push_back(fmt::format("stages[{}]", i));
    }
    return d;
}

Tensor& ModelParams::at(std::string_view name) {
    for (auto& p : tensors)
        if (p.name == name) return p.value;
    fail(ErrorKind::Input, fmt::format("no parameter named {}", name));
}

const Tensor& ModelParams::at(std::string_view name) const { return const_cast<ModelParams*>(this)->at(name); }

std::size_t ModelParams::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : tensors) n += p.value.size();
    return n;
}

Gradients zeros_like(const ModelParams& params) {
    Gradients g;
    g.reserve(params.tensors.size());
    for (const auto& p : params.tensors) g.emplace_back(p.value.shape);
    return g;
}

Prediction BatchPrediction::image(int b) const {
    Prediction p;
    p.w = loc_logits.dim(1) - 1;
    p.h = loc_logits.dim(2);
    p.C = loc_logits.dim(3);
    p.n = loc_logits.dim(4);
    const std::size_t per = loc_logits.size() / static_cast<std::size_t>(batch());
    p.loc_logits.assign(loc_logits.data.begin() + static_cast<std::ptrdiff_t>(b * per),
                        loc_logits.data.begin() + static_cast<std::ptrdiff_t>((b + 1) * per));
    p.group_logits.assign(group_logits.data.begin() + static_cast<std::ptrdiff_t>(b) * p.n,
                          group_logits.data.begin() + static_cast<std::ptrdiff_t>(b + 1) * p.n);
    return p;
}

Model::Model(ModelConfig cfg, kernels::Backend backend) : cfg_(std::move(cfg)), backend_(backend) {
    validate(cfg_);
    int c = cfg_.channels, h = cfg_.in_h, w = cfg_.in_w;
    for (const auto& s : cfg_.stages) {
        StageShape sh{};
        sh.in_c = c;
        sh.in_h = h;
        sh.in_w = w;
        sh.conv_h = (h + 2 * (s.kernel / 2) - s.kernel) / s.stride + 1;
        sh.conv_w = (w + 2 * (s.kernel / 2) - s.kernel) / s.stride + 1;
        sh.out_h = s.pool ? sh.conv_h / 2 : sh.conv_h;
        sh.out_w = s.pool ? sh.conv_w / 2 : sh.conv_w;
        shapes_.push_back(sh);
        c = s.out_channels;
        h = sh.out_h;
        w = sh.out_w;
    }
}

kernels::ConvShape Model::conv_shape(std::size_t stage, int batch) const {
    const auto& s = cfg_.stages[stage];
    const auto& sh = shapes_[stage];
    return {batch, sh.in_c, sh.in_h, sh.in_w, s.out_channels, s.kernel, s.stride, s.kernel / 2};
}

ModelParams Model::init(std::uint64_t seed) const {
    Rng rng(seed);
    ModelParams params;
    auto add = [&](std::string name, ParamGroup group, std::vector<int> shape, int fan_in, int fan_out) {
        Tensor t(std::move(shape));
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : t.data) v = rng.uniform(-bound, bound);
        params.tensors.push_back({std::move(name), group, std::move(t)});
    };
    auto add_bias = [&](std::string name, ParamGroup group, int size) {
        params.tensors.push_back({std::move(name), group, Tensor({size})});
    };
    for (std::size_t i = 0; i < cfg_.stages.size(); ++i) {
        const auto& s = cfg_.stages[i];
        const int in_c = shapes_[i].in_c;
        const int k2 = s.kernel * s.kernel;
        add(fmt::format("backbone.conv{}.weight", i), ParamGroup::Backbone, {s.out_channels, in_c, s.kernel, s.kernel},
            in_c * k2, s.out_channels * k2);
        add_bias(fmt::format("backbone.conv{}.bias", i), ParamGroup::Backbone, s.out_channels);
    }
    const int flat = cfg_.flat_size();
    add("backbone.fc.weight", ParamGroup::Backbone, {cfg_.feature_dim, flat}, flat, cfg_.feature_dim);
    add_bias("backbone.fc.bias", ParamGroup::Backbone, cfg_.feature_dim);
    add("hcl.weight", ParamGroup::HclHead, {cfg_.loc_size(), cfg_.feature_dim}, cfg_.feature_dim, cfg_.loc_size());
    add_bias("hcl.bias", ParamGroup::HclHead, cfg_.loc_size());
    add("pi.weight", ParamGroup::PiHead, {cfg_.n, cfg_.feature_dim}, cfg_.feature_dim, cfg_.n);
    add_bias("pi.bias", ParamGroup::PiHead, cfg_.n);
    return params;
}

BatchPrediction Model::forward(const ModelParams& params, const Tensor& images, Activations* cache) const {
    if (images.shape.size() != 4 || images.dim(1) != cfg_.channels || images.dim(2) != cfg_.in_h ||
        images.dim(3) != cfg_.in_w) {
        fail(ErrorKind::Input, fmt::format("image batch shape does not match model input [B, {}, {}, {}]", cfg_.channels,
                                           cfg_.in_h, cfg_.in_w));
    }
    if (params.tensors.size() != pi_index(cfg_) + 2) fail(ErrorKind::Input, "parameter set does not match model");
    const KernelTable& k = kernel_table(backend_);
    const int B = images.dim(0);

    Activations local;
    Activations& act = cache ? *cache : local;
    act.batch = B;
    act.input = images;
    act.conv_out.assign(cfg_.stages.size(), {});
    act.pool_out.assign(cfg_.stages.size(), {});
    act.pool_argmax.assign(cfg_.stages.size(), {});

    const Tensor* x = &act.input;
    for (std::size_t i = 0; i < cfg_.stages.size(); ++i) {
        const auto& s = cfg_.stages[i];
        const auto& sh = shapes_[i];
        const auto cs = conv_shape(i, B);
        act.conv_out[i] = Tensor({B, s.out_channels, sh.conv_h, sh.conv_w});
        k.conv_forward(cs, x->span(), params.tensors[2 * i].value.span(), params.tensors[2 * i + 1].value.span(),
                       act.conv_out[i].span());
        if (s.activation == Activation::Relu) k.relu_forward(act.conv_out[i].span());
        x = &act.conv_out[i];
        if (s.pool) {
            act.pool_out[i] = Tensor({B, s.out_channels, sh.out_h, sh.out_w});
            act.pool_argmax[i].resize(act.pool_out[i].size());
            k.maxpool_forward(B * s.out_channels, sh.conv_h, sh.conv_w, x->span(), act.pool_out[i].span(),
                              act.pool_argmax[i]);
            x = &act.pool_out[i];
        }
    }

    const int flat = cfg_.flat_size();
    act.features = Tensor({B, cfg_.feature_dim});
    k.linear_forward({B, flat, cfg_.feature_dim}, x->span(), params.tensors[fc_index(cfg_)].value.span(),
                     params.tensors[fc_index(cfg_) + 1].value.span(), act.features.span());
    if (cfg_.feature_activation == Activation::Relu) k.relu_forward(act.features.span());

    BatchPrediction out;
    out.loc_logits = Tensor({B, cfg_.w + 1, cfg_.h, cfg_.C, cfg_.n});
    out.group_logits = Tensor({B, cfg_.n});
    k.linear_forward({B, cfg_.feature_dim, cfg_.loc_size()}, act.features.span(),
                     params.tensors[hcl_index(cfg_)].value.span(), params.tensors[hcl_index(cfg_) + 1].value.span(),
                     out.loc_logits.span());
    k.linear_forward({B, cfg_.feature_dim, cfg_.n}, act.features.span(), params.tensors[pi_index(cfg_)].value.span(),
                     params.tensors[pi_index(cfg_) + 1].value.span(), out.group_logits.span());
    return out;
}

Gradients Model::backward(const ModelParams& params, const Activations& act, const Tensor& d_loc,
                          const Tensor& d_group) const {
    const KernelTable& k = kernel_table(backend_);
    const int B = act.batch;
    if (d_loc.size() != static_cast<std::size_t>(B) * cfg_.loc_size() ||
        d_group.size() != static_cast<std::size_t>(B) * cfg_.n) {
        fail(ErrorKind::Input, "logit gradient shapes do not match the cached batch");
    }
    Gradients g = zeros_like(params);
    const bool backbone_live = !params.is_frozen(ParamGroup::Backbone);
    const bool group_signal = std::any_of(d_group.data.begin(), d_group.data.end(), [](double v) { return v != 0.0; });

    const LinearShape hcl_shape{B, cfg_.feature_dim, cfg_.loc_size()};
    const LinearShape pi_shape{B, cfg_.feature_dim, cfg_.n};
    if (!params.is_frozen(ParamGroup::HclHead)) {
        k.linear_backward_params(hcl_shape, act.features.span(), d_loc.span(), g[hcl_index(cfg_)].span(),
                                 g[hcl_index(cfg_) + 1].span());
    }
    if (!params.is_frozen(ParamGroup::PiHead)) {
        k.linear_backward_params(pi_shape, act.features.span(), d_group.span(), g[pi_index(cfg_)].span(),
                                 g[pi_index(cfg_) + 1].span());
    }
    if (!backbone_live) return g;

    Tensor d_feat({B, cfg_.feature_dim});
    k.linear_backward_input(hcl_shape, d_loc.span(), params.tensors[hcl_index(cfg_)].value.span(), d_feat.span());
    if (group_signal) {
        Tensor d_feat_pi({B, cfg_.feature_dim});
        k.linear_backward_input(pi_shape, d_group.span(), params.tensors[pi_index(cfg_)].value.span(),
                                d_feat_pi.span());
        for (std::size_t i = 0; i < d_feat.size(); ++i) d_feat.data[i] += d_feat_pi.data[i];
    }
    if (cfg_.feature_activation == Activation::Relu) k.relu_backward(act.features.span(), d_feat.span());

    const std::size_t S = cfg_.stages.size();
    const Tensor& last = S == 0 ? act.input : (cfg_.stages[S - 1].pool ? act.pool_out[S - 1] : act.conv_out[S - 1]);
    const int flat = cfg_.flat_size();
    const LinearShape fc_shape{B, flat, cfg_.feature_dim};
    k.linear_backward_params(fc_shape, last.span(), d_feat.span(), g[fc_index(cfg_)].span(),
                             g[fc_index(cfg_) + 1].span());
    if (S == 0) return g;

    Tensor d_x(last.shape);
    k.linear_backward_input(fc_shape, d_feat.span(), params.tensors[fc_index(cfg_)].value.span(), d_x.span());

    for (std::size_t i = S; i-- > 0;) {
        const auto& s = cfg_.stages[i];
        const auto& sh = shapes_[i];
        Tensor d_conv;
        if (s.pool) {
            d_conv = Tensor(act.conv_out[i].shape);
            k.maxpool_backward(B * s.out_channels, sh.conv_h, sh.conv_w, d_x.span(), act.pool_argmax[i], d_conv.span());
        } else {
            d_conv = std::move(d_x);
        }
        if (s.activation == Activation::Relu) k.relu_backward(act.conv_out[i].span(), d_conv.span());
        const Tensor& stage_in = i == 0 ? act.input : (cfg_.stages[i - 1].pool ? act.pool_out[i - 1] : act.conv_out[i - 1]);
        const auto cs = conv_shape(i, B);
        k.conv_backward_params(cs, stage_in.span(), d_conv.span(), g[2 * i].span(), g[2 * i + 1].span());
        if (i > 0) {
            d_x = Tensor(stage_in.shape);
            k.conv_backward_input(cs, d_conv.span(), params.tensors[2 * i].value.span(), d_x.span());
        }
    }
    return g;
}

}  // namespace ufatd
