// ============================================================================
// grlnet/nn/loss.hpp - mean-reduced BCE and MSE losses with gradients
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "grlnet/nn/tensor.hpp"

namespace grlnet::nn {

struct LossResult {
    double value = 0.0;
    Tensor grad;  // d(loss)/d(pred), same shape as pred
};

inline constexpr double kBceClamp = 1e-7;

/// mean(-[t log p + (1-t) log(1-p)]), predictions clamped to [1e-7, 1-1e-7].
/// The gradient is zero where the clamp is active.
inline LossResult bce_loss(const Tensor& pred, const Tensor& target) {
    require_shape(target, pred.shape, "bce target");
    LossResult r{0.0, pred.zeros_like()};
    const double n = static_cast<double>(pred.numel());
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double t = target.value[i];
        if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("bce: target outside [0,1]");
        const double raw = pred.value[i];
        const double p = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
        r.value -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
        if (raw > kBceClamp && raw < 1.0 - kBceClamp) r.grad.value[i] = (-t / p + (1.0 - t) / (1.0 - p)) / n;
    }
    r.value /= n;
    return r;
}

/// Constant-target convenience: every element compared against `target`.
inline LossResult bce_loss(const Tensor& pred, double target) { return bce_loss(pred, Tensor(pred.shape, target)); }

inline LossResult mse_loss(const Tensor& pred, const Tensor& target) {
    require_shape(target, pred.shape, "mse target");
    LossResult r{0.0, pred.zeros_like()};
    const double n = static_cast<double>(pred.numel());
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double d = pred.value[i] - target.value[i];
        r.value += d * d;
        r.grad.value[i] = 2.0 * d / n;
    }
    r.value /= n;
    return r;
}

}  // namespace grlnet::nn
