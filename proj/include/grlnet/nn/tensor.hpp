// ============================================================================
// grlnet/nn/tensor.hpp - dense real tensor with a gradient buffer
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "grlnet/errors.hpp"

namespace grlnet::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

/// Row-major values plus a same-sized gradient buffer. Signal tensors use the
/// batch x channels x length layout; linear layers use batch x features.
struct Tensor {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;

    Tensor() = default;

    explicit Tensor(Shape s, double fill = 0.0)
        : shape(std::move(s)), value(shape_numel(shape), fill), grad(value.size(), 0.0) {
        for (auto d : shape)
            if (d == 0) throw ValidationError("tensor dimensions must be positive, got " + shape_string(shape));
    }

    Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), value(std::move(values)) {
        if (value.size() != shape_numel(shape))
            throw ValidationError("tensor of shape " + shape_string(shape) + " given " +
                                  std::to_string(value.size()) + " values");
        grad.assign(value.size(), 0.0);
    }

    std::size_t numel() const { return value.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    double& at(std::size_t b, std::size_t c, std::size_t l) { return value[(b * shape[1] + c) * shape[2] + l]; }
    double at(std::size_t b, std::size_t c, std::size_t l) const { return value[(b * shape[1] + c) * shape[2] + l]; }

    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

    /// Same shape, zero values.
    Tensor zeros_like() const { return Tensor(shape); }

    void require_finite(std::string_view what) const {
        for (double v : value)
            if (!std::isfinite(v)) throw NumericalError(std::string(what) + ": non-finite value");
        for (double g : grad)
            if (!std::isfinite(g)) throw NumericalError(std::string(what) + ": non-finite gradient");
    }
};

inline void require_shape(const Tensor& t, const Shape& expected, std::string_view what) {
    if (t.shape != expected)
        throw ValidationError(std::string(what) + ": expected shape " + shape_string(expected) + ", got " +
                              shape_string(t.shape));
}

inline void require_rank(const Tensor& t, std::size_t rank, std::string_view what) {
    if (t.rank() != rank)
        throw ValidationError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                              shape_string(t.shape));
}

/// A parameter or buffer tensor addressed by a dotted path, e.g. "g_local.encoder.0.weight".
struct NamedTensor {
    std::string name;
    Tensor* tensor;
};

}  // namespace grlnet::nn
