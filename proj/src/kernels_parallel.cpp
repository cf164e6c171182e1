#include <algorithm>

#include "ufatd/kernels.hpp"

namespace ufatd::kernels::parallel {

namespace {

// Output columns o with 0 <= o*stride - pad + k < limit.
struct Range {
    int lo, hi;  // [lo, hi)
};

Range valid_outputs(int k, int stride, int pad, int limit, int out_n) {
    int lo = 0;
    while (lo < out_n && lo * stride - pad + k < 0) ++lo;
    int hi = out_n;
    while (hi > lo && (hi - 1) * stride - pad + k >= limit) --hi;
    return {lo, hi};
}

}  // namespace

void conv2d_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out) {
    const int oh_n = s.out_h(), ow_n = s.out_w();
    const std::size_t in_plane = static_cast<std::size_t>(s.in_h) * s.in_w;
    const std::size_t out_plane = static_cast<std::size_t>(oh_n) * ow_n;
    const std::size_t ksize = static_cast<std::size_t>(s.kernel) * s.kernel;

#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < s.batch; ++b) {
        for (int oc = 0; oc < s.out_c; ++oc) {
            double* dst = out.data() + (static_cast<std::size_t>(b) * s.out_c + oc) * out_plane;
            std::fill(dst, dst + out_plane, bias[oc]);
            for (int ic = 0; ic < s.in_c; ++ic) {
                const double* src = in.data() + (static_cast<std::size_t>(b) * s.in_c + ic) * in_plane;
                const double* wk = weight.data() + (static_cast<std::size_t>(oc) * s.in_c + ic) * ksize;
                for (int kh = 0; kh < s.kernel; ++kh) {
                    const Range rh = valid_outputs(kh, s.stride, s.pad, s.in_h, oh_n);
                    for (int kw = 0; kw < s.kernel; ++kw) {
                        const Range rw = valid_outputs(kw, s.stride, s.pad, s.in_w, ow_n);
                        const double wv = wk[kh * s.kernel + kw];
                        for (int oh = rh.lo; oh < rh.hi; ++oh) {
                            const double* row = src + static_cast<std::size_t>(oh * s.stride - s.pad + kh) * s.in_w;
                            double* o = dst + static_cast<std::size_t>(oh) * ow_n;
                            for (int ow = rw.lo; ow < rw.hi; ++ow) o[ow] += wv * row[ow * s.stride - s.pad + kw];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_input(const ConvShape& s, std::span<const double> d_out, std::span<const double> weight,
                           std::span<double> d_in) {
    const int oh_n = s.out_h(), ow_n = s.out_w();
    const std::size_t in_plane = static_cast<std::size_t>(s.in_h) * s.in_w;
    const std::size_t out_plane = static_cast<std::size_t>(oh_n) * ow_n;
    const std::size_t ksize = static_cast<std::size_t>(s.kernel) * s.kernel;

#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < s.batch; ++b) {
        for (int ic = 0; ic < s.in_c; ++ic) {
            double* dst = d_in.data() + (static_cast<std::size_t>(b) * s.in_c + ic) * in_plane;
            std::fill(dst, dst + in_plane, 0.0);
            for (int oc = 0; oc < s.out_c; ++oc) {
                const double* g = d_out.data() + (static_cast<std::size_t>(b) * s.out_c + oc) * out_plane;
                const double* wk = weight.data() + (static_cast<std::size_t>(oc) * s.in_c + ic) * ksize;
                for (int kh = 0; kh < s.kernel; ++kh) {
                    const Range rh = valid_outputs(kh, s.stride, s.pad, s.in_h, oh_n);
                    for (int kw = 0; kw < s.kernel; ++kw) {
                        const Range rw = valid_outputs(kw, s.stride, s.pad, s.in_w, ow_n);
                        const double wv = wk[kh * s.kernel + kw];
                        for (int oh = rh.lo; oh < rh.hi; ++oh) {
                            double* row = dst + static_cast<std::size_t>(oh * s.stride - s.pad + kh) * s.in_w;
                            const double* gr = g + static_cast<std::size_t>(oh) * ow_n;
                            for (int ow = rw.lo; ow < rw.hi; ++ow) row[ow * s.stride - s.pad + kw] += wv * gr[ow];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_params(const ConvShape& s, std::span<const double> in, std::span<const double> d_out,
                            std::span<double> d_weight, std::span<double> d_bias) {
    const int oh_n = s.out_h(), ow_n = s.out_w();
    const std::size_t in_plane = static_cast<std::size_t>(s.in_h) * s.in_w;
    const std::size_t out_plane = static_cast<std::size_t>(oh_n) * ow_n;
    const std::size_t ksize = static_cast<std::size_t>(s.kernel) * s.kernel;

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < s.out_c; ++oc) {
        double bias_acc = 0.0;
        for (int b = 0; b < s.batch; ++b) {
            const double* g = d_out.data() + (static_cast<std::size_t>(b) * s.out_c + oc) * out_plane;
            for (std::size_t i = 0; i < out_plane; ++i) bias_acc += g[i];
        }
        d_bias[oc] = bias_acc;
        for (int ic = 0; ic < s.in_c; ++ic) {
            double* dw = d_weight.data() + (static_cast<std::size_t>(oc) * s.in_c + ic) * ksize;
            for (int kh = 0; kh < s.kernel; ++kh) {
                const Range rh = valid_outputs(kh, s.stride, s.pad, s.in_h, oh_n);
                for (int kw = 0; kw < s.kernel; ++kw) {
                    const Range rw = valid_outputs(kw, s.stride, s.pad, s.in_w, ow_n);
                    double acc = 0.0;
                    for (int b = 0; b < s.batch; ++b) {
                        const double* src = in.data() + (static_cast<std::size_t>(b) * s.in_c + ic) * in_plane;
                        const double* g = d_out.data() + (static_cast<std::size_t>(b) * s.out_c + oc) * out_plane;
                        for (int oh = rh.lo; oh < rh.hi; ++oh) {
                            const double* row = src + static_cast<std::size_t>(oh * s.stride - s.pad + kh) * s.in_w;
                            const double* gr = g + static_cast<std::size_t>(oh) * ow_n;
                            for (int ow = rw.lo; ow < rw.hi; ++ow) acc += gr[ow] * row[ow * s.stride - s.pad + kw];
                        }
                    }
                    dw[kh * s.kernel + kw] = acc;
                }
            }
        }
    }
}

void linear_forward(const LinearShape& s, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < s.batch; ++b) {
        for (int o = 0; o < s.out_f; ++o) {
            const double* xr = x.data() + static_cast<std::size_t>(b) * s.in_f;
            const double* wr = weight.data() + static_cast<std::size_t>(o) * s.in_f;
            double acc = 0.0;
            for (int i = 0; i < s.in_f; ++i) acc += xr[i] * wr[i];
            y[static_cast<std::size_t>(b) * s.out_f + o] = acc + bias[o];
        }
    }
}

void linear_backward_input(const LinearShape& s, std::span<const double> d_y, std::span<const double> weight,
                           std::span<double> d_x) {
#pragma omp parallel for schedule(static)
    for (int b = 0; b < s.batch; ++b) {
        double* dx = d_x.data() + static_cast<std::size_t>(b) * s.in_f;
        std::fill(dx, dx + s.in_f, 0.0);
        for (int o = 0; o < s.out_f; ++o) {
            const double g = d_y[static_cast<std::size_t>(b) * s.out_f + o];
            if (g == 0.0) continue;
            const double* wr = weight.data() + static_cast<std::size_t>(o) * s.in_f;
            for (int i = 0; i < s.in_f; ++i) dx[i] += g * wr[i];
        }
    }
}

void linear_backward_params(const LinearShape& s, std::span<const double> x, std::span<const double> d_y,
                            std::span<double> d_weight, std::span<double> d_bias) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < s.out_f; ++o) {
        double* dw = d_weight.data() + static_cast<std::size_t>(o) * s.in_f;
        std::fill(dw, dw + s.in_f, 0.0);
        double bias_acc = 0.0;
        for (int b = 0; b < s.batch; ++b) {
            const double g = d_y[static_cast<std::size_t>(b) * s.out_f + o];
            bias_acc += g;
            if (g == 0.0) continue;
            const double* xr = x.data() + static_cast<std::size_t>(b) * s.in_f;
            for (int i = 0; i < s.in_f; ++i) dw[i] += g * xr[i];
        }
        d_bias[o] = bias_acc;
    }
}

void relu_forward(std::span<double> x) {
    const long n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(std::span<const double> y, std::span<double> d) {
    const long n = static_cast<long>(d.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i)
        if (!(y[i] > 0.0)) d[i] = 0.0;
}

void maxpool2_forward(int planes, int in_h, int in_w, std::span<const double> in, std::span<double> out,
                      std::span<std::int32_t> argmax) {
    const int oh_n = in_h / 2, ow_n = in_w / 2;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = in.data() + static_cast<std::size_t>(p) * in_h * in_w;
        for (int oh = 0; oh < oh_n; ++oh)
            for (int ow = 0; ow < ow_n; ++ow) {
                const int base = 2 * oh * in_w + 2 * ow;
                const int cand[4] = {base, base + 1, base + in_w, base + in_w + 1};
                int best = cand[0];
                for (int c = 1; c < 4; ++c)
                    if (src[cand[c]] > src[best]) best = cand[c];
                const std::size_t o = (static_cast<std::size_t>(p) * oh_n + oh) * ow_n + ow;
                out[o] = src[best];
                argmax[o] = best;
            }
    }
}

void maxpool2_backward(int planes, int in_h, int in_w, std::span<const double> d_out,
                       std::span<const std::int32_t> argmax, std::span<double> d_in) {
    const std::size_t per_plane = static_cast<std::size_t>(in_h / 2) * (in_w / 2);
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        double* dst = d_in.data() + static_cast<std::size_t>(p) * in_h * in_w;
        std::fill(dst, dst + static_cast<std::size_t>(in_h) * in_w, 0.0);
        for (std::size_t o = 0; o < per_plane; ++o) {
            const std::size_t i = static_cast<std::size_t>(p) * per_plane + o;
            dst[argmax[i]] += d_out[i];
        }
    }
}

}  // namespace ufatd::kernels::parallel
