// ============================================================================
// grlnet/nn/adam.hpp - Adam optimizer with bias correction
// ============================================================================
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "grlnet/nn/tensor.hpp"

namespace grlnet::nn {

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t t = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    AdamState() = default;
    explicit AdamState(double lr_) : lr(lr_) {}

    /// Sizes the moment buffers to match `params` (zeroed).
    void init(std::span<const NamedTensor> params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.tensor->numel(), 0.0);
            v.emplace_back(p.tensor->numel(), 0.0);
        }
        t = 0;
    }
};

/// One update from the gradients currently held in each parameter's grad buffer.
inline void adam_step(std::span<const NamedTensor> params, AdamState& state) {
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw ValidationError("adam: state holds " + std::to_string(state.m.size()) + " moment buffers for " +
                              std::to_string(params.size()) + " parameters");
    state.t += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& w = *params[p].tensor;
        auto& m = state.m[p];
        auto& v = state.v[p];
        if (m.size() != w.numel() || v.size() != w.numel())
            throw ValidationError("adam: moment size mismatch for '" + params[p].name + "'");
        for (std::size_t i = 0; i < w.numel(); ++i) {
            const double g = w.grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            w.value[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace grlnet::nn
