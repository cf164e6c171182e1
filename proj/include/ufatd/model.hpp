#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ufatd/codec.hpp"
#include "ufatd/kernels.hpp"
#include "ufatd/tensor.hpp"

namespace ufatd {

enum class Activation : std::uint32_t { Identity = 0, Relu = 1 };

struct StageConfig {
    int kernel = 3;
    int stride = 2;
    int out_channels = 8;
    Activation activation = Activation::Relu;
    bool pool = false;  // 2x2 max pool after the activation
    bool operator==(const StageConfig&) const = default;
};

/// Backbone (conv stages, flatten, linear to feature_dim) feeding two linear
/// heads: the locator with (w+1)*h*C*n outputs and the group classifier with n.
struct ModelConfig {
    int channels = 1;
    int in_h = 80;
    int in_w = 160;
    std::vector<StageConfig> stages{{3, 2, 8}, {3, 2, 16}, {3, 2, 32}};
    int feature_dim = 256;
    Activation feature_activation = Activation::Relu;
    int C = 2;
    int h = 12;
    int w = 40;
    int n = 3;

    int loc_size() const { return (w + 1) * h * C * n; }
    int flat_size() const;
    bool operator==(const ModelConfig&) const = default;
};

void validate(const ModelConfig& cfg);

/// Names of fields that differ, e.g. {"h", "stages[1].stride"}.
std::vector<std::string> config_diff(const ModelConfig& expected, const ModelConfig& actual);

enum class ParamGroup : int { Backbone = 0, HclHead = 1, PiHead = 2 };
inline constexpr std::array<std::string_view, 3> kGroupNames{"backbone", "hcl_head", "pi_head"};

struct Param {
    std::string name;
    ParamGroup group = ParamGroup::Backbone;
    Tensor value;
};

struct ModelParams {
    std::vector<Param> tensors;
    std::array<bool, 3> frozen{false, false, false};

    bool is_frozen(ParamGroup g) const { return frozen[static_cast<int>(g)]; }
    void set_frozen(ParamGroup g, bool f) { frozen[static_cast<int>(g)] = f; }
    Tensor& at(std::string_view name);
    const Tensor& at(std::string_view name) const;
    std::size_t scalar_count() const;
};

/// One tensor per entry of ModelParams::tensors, same shapes.
using Gradients = std::vector<Tensor>;
Gradients zeros_like(const ModelParams& params);

struct BatchPrediction {
    Tensor loc_logits;    // [B, w+1, h, C, n]
    Tensor group_logits;  // [B, n]

    int batch() const { return group_logits.dim(0); }
    Prediction image(int b) const;
};

class Model {
public:
    explicit Model(ModelConfig cfg, kernels::Backend backend = kernels::Backend::Parallel);

    const ModelConfig& config() const { return cfg_; }
    kernels::Backend backend() const { return backend_; }

    /// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.
    ModelParams init(std::uint64_t seed) const;

    /// Intermediate values kept for backward().
    struct Activations {
        int batch = 0;
        Tensor input;
        std::vector<Tensor> conv_out;  // after activation
        std::vector<Tensor> pool_out;
        std::vector<std::vector<std::int32_t>> pool_argmax;
        Tensor features;               // [B, feature_dim] after feature activation
    };

    BatchPrediction forward(const ModelParams& params, const Tensor& images, Activations* cache = nullptr) const;

    /// Gradients of a loss whose derivatives w.r.t. the logits are d_loc and d_group.
    /// Frozen groups get all-zero gradients; the backbone is skipped entirely when frozen.
    Gradients backward(const ModelParams& params, const Activations& cache, const Tensor& d_loc,
                       const Tensor& d_group) const;

private:
    struct StageShape {
        int in_c, in_h, in_w, conv_h, conv_w, out_h, out_w;
    };

    kernels::ConvShape conv_shape(std::size_t stage, int batch) const;

    ModelConfig cfg_;
    kernels::Backend backend_;
    std::vector<StageShape> shapes_;
};

}  // namespace ufatd
