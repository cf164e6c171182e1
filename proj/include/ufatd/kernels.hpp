#pragma once

#include <cstdint>
#include <span>

// Layer kernels in two flavours with identical signatures:
//   reference  plain serial loops, written for obviousness; used as the test oracle
//   parallel   OpenMP; every output element is owned by one thread and summed in a
//              fixed order, so results do not depend on the thread count
// Backward kernels overwrite their outputs.

namespace ufatd::kernels {

struct ConvShape {
    int batch = 1;
    int in_c = 1, in_h = 1, in_w = 1;
    int out_c = 1;
    int kernel = 3, stride = 1, pad = 1;

    int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
    int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
};

struct LinearShape {
    int batch = 1;
    int in_f = 1;
    int out_f = 1;
};

enum class Backend { Reference, Parallel };

namespace reference {
void conv2d_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out);
void conv2d_backward_input(const ConvShape& s, std::span<const double> d_out, std::span<const double> weight,
                           std::span<double> d_in);
void conv2d_backward_params(const ConvShape& s, std::span<const double> in, std::span<const double> d_out,
                            std::span<double> d_weight, std::span<double> d_bias);
void linear_forward(const LinearShape& s, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y);
void linear_backward_input(const LinearShape& s, std::span<const double> d_y, std::span<const double> weight,
                           std::span<double> d_x);
void linear_backward_params(const LinearShape& s, std::span<const double> x, std::span<const double> d_y,
                            std::span<double> d_weight, std::span<double> d_bias);
void relu_forward(std::span<double> x);
void relu_backward(std::span<const double> y, std::span<double> d);
void maxpool2_forward(int planes, int in_h, int in_w, std::span<const double> in, std::span<double> out,
                      std::span<std::int32_t> argmax);
void maxpool2_backward(int planes, int in_h, int in_w, std::span<const double> d_out,
                       std::span<const std::int32_t> argmax, std::span<double> d_in);
}  // namespace reference

namespace parallel {
void conv2d_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out);
void conv2d_backward_input(const ConvShape& s, std::span<const double> d_out, std::span<const double> weight,
                           std::span<double> d_in);
void conv2d_backward_params(const ConvShape& s, std::span<const double> in, std::span<const double> d_out,
                            std::span<double> d_weight, std::span<double> d_bias);
void linear_forward(const LinearShape& s, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y);
void linear_backward_input(const LinearShape& s, std::span<const double> d_y, std::span<const double> weight,
                           std::span<double> d_x);
void linear_backward_params(const LinearShape& s, std::span<const double> x, std::span<const double> d_y,
                            std::span<double> d_weight, std::span<double> d_bias);
void relu_forward(std::span<double> x);
void relu_backward(std::span<const double> y, std::span<double> d);
void maxpool2_forward(int planes, int in_h, int in_w, std::span<const double> in, std::span<double> out,
                      std::span<std::int32_t> argmax);
void maxpool2_backward(int planes, int in_h, int in_w, std::span<const double> d_out,
                       std::span<const std::int32_t> argmax, std::span<double> d_in);
}  // namespace parallel

}  // namespace ufatd::kernels
