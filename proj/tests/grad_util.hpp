#pragma once

#include <random>
#include <vector>

#include "grlnet/nn/grad_check.hpp"
#include "grlnet/nn/layers.hpp"
#include "grlnet/nn/loss.hpp"

namespace grlnet::testing {

inline nn::Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    nn::Tensor t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.value) v = u(rng);
    return t;
}

/// Values with |v| in [margin, 1], random sign.
inline nn::Tensor away_from_zero(nn::Shape shape, std::mt19937_64& rng, double margin) {
    nn::Tensor t(std::move(shape));
    std::uniform_real_distribution<double> mag(margin, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (auto& v : t.value) v = sign(rng) ? mag(rng) : -mag(rng);
    return t;
}

inline double dot(const nn::Tensor& a, const nn::Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a.value[i] * b.value[i];
    return s;
}

/// Max relative error of the analytic input and parameter gradients of `layer` under the
/// scalar loss <layer(x), R> for a fixed random R.
template <class Layer>
double layer_grad_error(Layer& layer, nn::Tensor x, nn::Mode mode, std::mt19937_64& rng) {
    std::vector<nn::NamedTensor> params;
    layer.parameters("", params);
    nn::zero_grad(params);
    nn::Cache cache;
    const nn::Tensor y = layer.forward(x, mode, cache);
    const nn::Tensor r = random_tensor(y.shape, rng);
    const nn::Tensor dx = layer.backward(cache, r);
    x.grad = dx.value;
    const nn::Mode probe = mode == nn::Mode::train ? nn::Mode::train_frozen_stats : mode;
    auto loss = [&] {
        nn::Cache c;
        return dot(layer.forward(x, probe, c), r);
    };
    std::vector<nn::Tensor*> tensors{&x};
    for (auto& p : params) tensors.push_back(p.tensor);
    return nn::grad_check(loss, tensors);
}

}  // namespace grlnet::testing
