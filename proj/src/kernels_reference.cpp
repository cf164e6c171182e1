#include <algorithm>

#include "ufatd/kernels.hpp"

namespace ufatd::kernels::reference {

namespace {

std::size_t at4(int a, int b, int c, int d, int B, int C, int D) {
    return ((static_cast<std::size_t>(a) * B + b) * C + c) * D + d;
}

}  // namespace

void conv2d_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out) {
    const int oh_n = s.out_h(), ow_n = s.out_w();
    for (int b = 0; b < s.batch; ++b)
        for (int oc = 0; oc < s.out_c; ++oc)
            for (int oh = 0; oh < oh_n; ++oh)
                for (int ow = 0; ow < ow_n; ++ow) {
                    double acc = bias[oc];
                    for (int ic = 0; ic < s.in_c; ++ic)
                        for (int kh = 0; kh < s.kernel; ++kh)
                            for (int kw = 0; kw < s.kernel; ++kw) {
                                const int ih = oh * s.stride - s.pad + kh;
                                const int iw = ow * s.stride - s.pad + kw;
                                if (ih < 0 || ih >= s.in_h || iw < 0 || iw >= s.in_w) continue;
                                acc += in[at4(b, ic, ih, iw, s.in_c, s.in_h, s.in_w)] *
                                       weight[at4(oc, ic, kh, kw, s.in_c, s.kernel, s.kernel)];
                            }
                    out[at4(b, oc, oh, ow, s.out_c, oh_n, ow_n)] = acc;
                }
}

void conv2d_backward_input(const ConvShape& s, std::span<const double> d_out, std::span<const double> weight,
                           std::span<double> d_in) {
    std::fill(d_in.begin(), d_in.end(), 0.0);
    const int oh_n = s.out_h(), ow_n = s.out_w();
    for (int b = 0; b < s.batch; ++b)
        for (int oc = 0; oc < s.out_c; ++oc)
            for (int oh = 0; oh < oh_n; ++oh)
                for (int ow = 0; ow < ow_n; ++ow) {
                    const double g = d_out[at4(b, oc, oh, ow, s.out_c, oh_n, ow_n)];
                    for (int ic = 0; ic < s.in_c; ++ic)
                        for (int kh = 0; kh < s.kernel; ++kh)
                            for (int kw = 0; kw < s.kernel; ++kw) {
                                const int ih = oh * s.stride - s.pad + kh;
                                const int iw = ow * s.stride - s.pad + kw;
                                if (ih < 0 || ih >= s.in_h || iw < 0 || iw >= s.in_w) continue;
                                d_in[at4(b, ic, ih, iw, s.in_c, s.in_h, s.in_w)] +=
                                    g * weight[at4(oc, ic, kh, kw, s.in_c, s.kernel, s.kernel)];
                            }
                }
}

void conv2d_backward_params(const ConvShape& s, std::span<const double> in, std::span<const double> d_out,
                            std::span<double> d_weight, std::span<double> d_bias) {
    std::fill(d_weight.begin(), d_weight.end(), 0.0);
    std::fill(d_bias.begin(), d_bias.end(), 0.0);
    const int oh_n = s.out_h(), ow_n = s.out_w();
    for (int b = 0; b < s.batch; ++b)
        for (int oc = 0; oc < s.out_c; ++oc)
            for (int oh = 0; oh < oh_n; ++oh)
                for (int ow = 0; ow < ow_n; ++ow) {
                    const double g = d_out[at4(b, oc, oh, ow, s.out_c, oh_n, ow_n)];
                    d_bias[oc] += g;
                    for (int ic = 0; ic < s.in_c; ++ic)
                        for (int kh = 0; kh < s.kernel; ++kh)
                            for (int kw = 0; kw < s.kernel; ++kw) {
                                const int ih = oh * s.stride - s.pad + kh;
                                const int iw = ow * s.stride - s.pad + kw;
                                if (ih < 0 || ih >= s.in_h || iw < 0 || iw >= s.in_w) continue;
                                d_weight[at4(oc, ic, kh, kw, s.in_c, s.kernel, s.kernel)] +=
                                    g * in[at4(b, ic, ih, iw, s.in_c, s.in_h, s.in_w)];
                            }
                }
}

void linear_forward(const LinearShape& s, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y) {
    for (int b = 0; b < s.batch; ++b)
        for (int o = 0; o < s.out_f; ++o) {
            double acc = bias[o];
            for (int i = 0; i < s.in_f; ++i) acc += x[static_cast<std::size_t>(b) * s.in_f + i] * weight[static_cast<std::size_t>(o) * s.in_f + i];
            y[static_cast<std::size_t>(b) * s.out_f + o] = acc;
        }
}

void linear_backward_input(const LinearShape& s, std::span<const double> d_y, std::span<const double> weight,
                           std::span<double> d_x) {
    std::fill(d_x.begin(), d_x.end(), 0.0);
    for (int b = 0; b < s.batch; ++b)
        for (int o = 0; o < s.out_f; ++o)
            for (int i = 0; i < s.in_f; ++i)
                d_x[static_cast<std::size_t>(b) * s.in_f + i] +=
                    d_y[static_cast<std::size_t>(b) * s.out_f + o] * weight[static_cast<std::size_t>(o) * s.in_f + i];
}

void linear_backward_params(const LinearShape& s, std::span<const double> x, std::span<const double> d_y,
                            std::span<double> d_weight, std::span<double> d_bias) {
    std::fill(d_weight.begin(), d_weight.end(), 0.0);
    std::fill(d_bias.begin(), d_bias.end(), 0.0);
    for (int b = 0; b < s.batch; ++b)
        for (int o = 0; o < s.out_f; ++o) {
            const double g = d_y[static_cast<std::size_t>(b) * s.out_f + o];
            d_bias[o] += g;
            for (int i = 0; i < s.in_f; ++i)
                d_weight[static_cast<std::size_t>(o) * s.in_f + i] += g * x[static_cast<std::size_t>(b) * s.in_f + i];
        }
}

void relu_forward(std::span<double> x) {
    for (double& v : x) v = v > 0.0 ? v : 0.0;
}

void relu_backward(std::span<const double> y, std::span<double> d) {
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!(y[i] > 0.0)) d[i] = 0.0;
}

void maxpool2_forward(int planes, int in_h, int in_w, std::span<const double> in, std::span<double> out,
                      std::span<std::int32_t> argmax) {
    const int oh_n = in_h / 2, ow_n = in_w / 2;
    for (int p = 0; p < planes; ++p)
        for (int oh = 0; oh < oh_n; ++oh)
            for (int ow = 0; ow < ow_n; ++ow) {
                std::int32_t best = -1;
                double best_v = 0.0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const auto idx = static_cast<std::int32_t>((2 * oh + dy) * in_w + 2 * ow + dx);
                        const double v = in[static_cast<std::size_t>(p) * in_h * in_w + idx];
                        if (best < 0 || v > best_v) {
                            best = idx;
                            best_v = v;
                        }
                    }
                const std::size_t o = (static_cast<std::size_t>(p) * oh_n + oh) * ow_n + ow;
                out[o] = best_v;
                argmax[o] = best;
            }
}

void maxpool2_backward(int planes, int in_h, int in_w, std::span<const double> d_out,
                       std::span<const std::int32_t> argmax, std::span<double> d_in) {
    std::fill(d_in.begin(), d_in.end(), 0.0);
    const std::size_t per_plane = static_cast<std::size_t>(in_h / 2) * (in_w / 2);
    for (int p = 0; p < planes; ++p)
        for (std::size_t o = 0; o < per_plane; ++o) {
            const std::size_t i = static_cast<std::size_t>(p) * per_plane + o;
            d_in[static_cast<std::size_t>(p) * in_h * in_w + argmax[i]] += d_out[i];
        }
}

}  // namespace ufatd::kernels::reference
