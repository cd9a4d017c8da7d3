// ============================================================================
// grlnet/nn/grad_check.hpp - central finite-difference gradient checker
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

#include "grlnet/nn/tensor.hpp"

namespace grlnet::nn {

/// |analytic - numeric| / max(1, |analytic|, |numeric|)
inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

/// Compares the analytic gradients already stored in each tensor's grad buffer
/// against central differences of `loss`. Returns the maximum relative error.
inline double grad_check(const std::function<double()>& loss, std::span<Tensor* const> tensors, double eps = 1e-5) {
    double worst = 0.0;
    for (Tensor* t : tensors) {
        for (std::size_t i = 0; i < t->numel(); ++i) {
            const double saved = t->value[i];
            t->value[i] = saved + eps;
            const double up = loss();
            t->value[i] = saved - eps;
            const double down = loss();
            t->value[i] = saved;
            worst = std::max(worst, relative_error(t->grad[i], (up - down) / (2.0 * eps)));
        }
    }
    return worst;
}

}  // namespace grlnet::nn
