#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace ufatd {

/// Dense row-major float64 tensor.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims, double fill = 0.0)
        : shape(std::move(dims)), data(element_count(shape), fill) {}

    static std::size_t element_count(const std::vector<int>& dims) {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                               [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
    }

    std::size_t size() const { return data.size(); }
    int dim(std::size_t i) const { return shape[i]; }
    std::span<double> span() { return data; }
    std::span<const double> span() const { return data; }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
    bool operator==(const Tensor&) const = default;
};

}  // namespace ufatd
