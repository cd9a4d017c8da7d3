// ============================================================================
// grlnet/nn/layers.hpp - differentiable layers with explicit forward/backward
//
// Forward passes record what backward needs in a Cache owned by the caller,
// so one layer can be evaluated on several inputs before any backward pass.
// Backward returns the gradient w.r.t. the layer input (carried in the
// returned tensor's value buffer) and accumulates parameter gradients into
// each parameter's grad buffer. Gradients are never zeroed implicitly.
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "grlnet/nn/tensor.hpp"

namespace grlnet::nn {

enum class Mode {
    train,               // batch statistics, running statistics updated
    train_frozen_stats,  // batch statistics, running statistics untouched
    eval,                // running statistics
};

struct Cache {
    std::vector<Tensor> saved;
    std::vector<double> aux;
    std::vector<Cache> children;
};

// ----------------------------------------------------------------------------
// Convolution kernels
// ----------------------------------------------------------------------------

namespace detail {

// Range [first, last) of t in [0, dst_len) with 0 <= t*stride + offset < src_len.
inline std::pair<std::size_t, std::size_t> valid_range(std::ptrdiff_t offset, std::size_t stride, std::size_t src_len,
                                                       std::size_t dst_len) {
    const auto s = static_cast<std::ptrdiff_t>(stride);
    std::ptrdiff_t first = 0;
    if (offset < 0) first = (-offset + s - 1) / s;
    const std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(src_len) - 1 - offset;
    if (hi < 0) return {0, 0};
    std::ptrdiff_t last = hi / s + 1;
    last = std::min<std::ptrdiff_t>(last, static_cast<std::ptrdiff_t>(dst_len));
    if (first >= last) return {0, 0};
    return {static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
}

inline void uniform_fill(Tensor& t, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.value) v = dist(rng);
}

}  // namespace detail

inline std::size_t conv1d_output_length(std::size_t len, std::size_t kernel, std::size_t stride, std::size_t padding) {
    if (stride == 0) throw ValidationError("conv1d: stride must be at least 1");
    if (kernel > len + 2 * padding)
        throw ValidationError("conv1d: kernel " + std::to_string(kernel) + " longer than padded input " +
                              std::to_string(len + 2 * padding));
    return (len + 2 * padding - kernel) / stride + 1;
}

inline std::size_t conv_transpose1d_output_length(std::size_t len, std::size_t kernel, std::size_t stride,
                                                  std::size_t padding, std::size_t output_padding) {
    if (stride == 0) throw ValidationError("conv_transpose1d: stride must be at least 1");
    const auto out = static_cast<std::ptrdiff_t>((len - 1) * stride + kernel + output_padding) -
                     static_cast<std::ptrdiff_t>(2 * padding);
    if (out <= 0) throw ValidationError("conv_transpose1d: non-positive output length");
    return static_cast<std::size_t>(out);
}

/// Cross-correlation: out[b,o,t] = bias[o] + sum_{c,k} w[o,c,k] * in[b,c,t*stride + k - padding].
inline Tensor conv1d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
                             std::size_t padding) {
    require_rank(input, 3, "conv1d input");
    require_rank(weight, 3, "conv1d weight");
    const std::size_t batch = input.dim(0), cin = input.dim(1), len = input.dim(2);
    const std::size_t cout = weight.dim(0), kernel = weight.dim(2);
    if (weight.dim(1) != cin)
        throw ValidationError("conv1d: input has " + std::to_string(cin) + " channels, weight expects " +
                              std::to_string(weight.dim(1)));
    require_shape(bias, {cout}, "conv1d bias");
    const std::size_t lout = conv1d_output_length(len, kernel, stride, padding);
    Tensor out({batch, cout, lout});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < cout; ++o) {
            double* dst = &out.value[(b * cout + o) * lout];
            std::fill(dst, dst + lout, bias.value[o]);
            for (std::size_t c = 0; c < cin; ++c) {
                const double* src = &input.value[(b * cin + c) * len];
                const double* w = &weight.value[(o * cin + c) * kernel];
                for (std::size_t k = 0; k < kernel; ++k) {
                    const auto off = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(padding);
                    const auto [t0, t1] = detail::valid_range(off, stride, len, lout);
                    const double wk = w[k];
                    for (std::size_t t = t0; t < t1; ++t) dst[t] += wk * src[static_cast<std::ptrdiff_t>(t * stride) + off];
                }
            }
        }
    }
    return out;
}

struct ConvGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

inline ConvGrads conv1d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight, std::size_t stride,
                                 std::size_t padding) {
    const std::size_t batch = input.dim(0), cin = input.dim(1), len = input.dim(2);
    const std::size_t cout = weight.dim(0), kernel = weight.dim(2);
    const std::size_t lout = conv1d_output_length(len, kernel, stride, padding);
    require_shape(grad_out, {batch, cout, lout}, "conv1d grad_out");
    ConvGrads g{input.zeros_like(), weight.zeros_like(), Tensor({cout})};
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < cout; ++o) {
            const double* go = &grad_out.value[(b * cout + o) * lout];
            double sum = 0.0;
            for (std::size_t t = 0; t < lout; ++t) sum += go[t];
            g.bias.value[o] += sum;
            for (std::size_t c = 0; c < cin; ++c) {
                const double* src = &input.value[(b * cin + c) * len];
                double* gin = &g.input.value[(b * cin + c) * len];
                const double* w = &weight.value[(o * cin + c) * kernel];
                double* gw = &g.weight.value[(o * cin + c) * kernel];
                for (std::size_t k = 0; k < kernel; ++k) {
                    const auto off = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(padding);
                    const auto [t0, t1] = detail::valid_range(off, stride, len, lout);
                    const double wk = w[k];
                    double acc = 0.0;
                    for (std::size_t t = t0; t < t1; ++t) {
                        const auto i = static_cast<std::ptrdiff_t>(t * stride) + off;
                        acc += src[i] * go[t];
                        gin[i] += wk * go[t];
                    }
                    gw[k] += acc;
                }
            }
        }
    }
    return g;
}

/// Fractionally-strided convolution with weight layout in_channels x out_channels x kernel:
/// out[b,o,i*stride + k - padding] += in[b,c,i] * w[c,o,k].
inline Tensor conv_transpose1d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias,
                                       std::size_t stride, std::size_t padding, std::size_t output_padding = 0) {
    require_rank(input, 3, "conv_transpose1d input");
    require_rank(weight, 3, "conv_transpose1d weight");
    const std::size_t batch = input.dim(0), cin = input.dim(1), len = input.dim(2);
    const std::size_t cout = weight.dim(1), kernel = weight.dim(2);
    if (weight.dim(0) != cin)
        throw ValidationError("conv_transpose1d: input has " + std::to_string(cin) + " channels, weight expects " +
                              std::to_string(weight.dim(0)));
    require_shape(bias, {cout}, "conv_transpose1d bias");
    const std::size_t lout = conv_transpose1d_output_length(len, kernel, stride, padding, output_padding);
    Tensor out({batch, cout, lout});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < cout; ++o) {
            double* dst = &out.value[(b * cout + o) * lout];
            std::fill(dst, dst + lout, bias.value[o]);
            for (std::size_t c = 0; c < cin; ++c) {
                const double* src = &input.value[(b * cin + c) * len];
                const double* w = &weight.value[(c * cout + o) * kernel];
                for (std::size_t k = 0; k < kernel; ++k) {
                    const auto off = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(padding);
                    const auto [i0, i1] = detail::valid_range(off, stride, lout, len);
                    const double wk = w[k];
                    for (std::size_t i = i0; i < i1; ++i) dst[static_cast<std::ptrdiff_t>(i * stride) + off] += wk * src[i];
                }
            }
        }
    }
    return out;
}

inline ConvGrads conv_transpose1d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight,
                                           std::size_t stride, std::size_t padding, std::size_t output_padding = 0) {
    const std::size_t batch = input.dim(0), cin = input.dim(1), len = input.dim(2);
    const std::size_t cout = weight.dim(1), kernel = weight.dim(2);
    const std::size_t lout = conv_transpose1d_output_length(len, kernel, stride, padding, output_padding);
    require_shape(grad_out, {batch, cout, lout}, "conv_transpose1d grad_out");
    ConvGrads g{input.zeros_like(), weight.zeros_like(), Tensor({cout})};
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < cout; ++o) {
            const double* go = &grad_out.value[(b * cout + o) * lout];
            double sum = 0.0;
            for (std::size_t t = 0; t < lout; ++t) sum += go[t];
            g.bias.value[o] += sum;
            for (std::size_t c = 0; c < cin; ++c) {
                const double* src = &input.value[(b * cin + c) * len];
                double* gin = &g.input.value[(b * cin + c) * len];
                const double* w = &weight.value[(c * cout + o) * kernel];
                double* gw = &g.weight.value[(c * cout + o) * kernel];
                for (std::size_t k = 0; k < kernel; ++k) {
                    const auto off = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(padding);
                    const auto [i0, i1] = detail::valid_range(off, stride, lout, len);
                    const double wk = w[k];
                    double acc = 0.0;
                    for (std::size_t i = i0; i < i1; ++i) {
                        const double gv = go[static_cast<std::ptrdiff_t>(i * stride) + off];
                        acc += src[i] * gv;
                        gin[i] += wk * gv;
                    }
                    gw[k] += acc;
                }
            }
        }
    }
    return g;
}

// ----------------------------------------------------------------------------
// Elementwise and dense kernels
// ----------------------------------------------------------------------------

inline Tensor relu_forward(const Tensor& x) {
    Tensor out = x.zeros_like();
    for (std::size_t i = 0; i < x.numel(); ++i) out.value[i] = x.value[i] > 0.0 ? x.value[i] : 0.0;
    return out;
}

inline Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
    Tensor g = input.zeros_like();
    for (std::size_t i = 0; i < input.numel(); ++i) g.value[i] = input.value[i] > 0.0 ? grad_out.value[i] : 0.0;
    return g;
}

inline double sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

inline Tensor sigmoid_forward(const Tensor& x) {
    Tensor out = x.zeros_like();
    for (std::size_t i = 0; i < x.numel(); ++i) out.value[i] = sigmoid(x.value[i]);
    return out;
}

inline Tensor sigmoid_backward(const Tensor& grad_out, const Tensor& output) {
    Tensor g = output.zeros_like();
    for (std::size_t i = 0; i < output.numel(); ++i)
        g.value[i] = grad_out.value[i] * output.value[i] * (1.0 - output.value[i]);
    return g;
}

/// out[b,o] = bias[o] + sum_i w[o,i] * in[b,i].
inline Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require_rank(input, 2, "linear input");
    const std::size_t batch = input.dim(0), in = input.dim(1), out_features = weight.dim(0);
    if (weight.dim(1) != in)
        throw ValidationError("linear: input has " + std::to_string(in) + " features, weight expects " +
                              std::to_string(weight.dim(1)));
    require_shape(bias, {out_features}, "linear bias");
    Tensor out({batch, out_features});
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < out_features; ++o) {
            double acc = bias.value[o];
            const double* w = &weight.value[o * in];
            const double* x = &input.value[b * in];
            for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
            out.value[b * out_features + o] = acc;
        }
    return out;
}

inline ConvGrads linear_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight) {
    const std::size_t batch = input.dim(0), in = input.dim(1), out_features = weight.dim(0);
    require_shape(grad_out, {batch, out_features}, "linear grad_out");
    ConvGrads g{input.zeros_like(), weight.zeros_like(), Tensor({out_features})};
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < out_features; ++o) {
            const double go = grad_out.value[b * out_features + o];
            g.bias.value[o] += go;
            const double* w = &weight.value[o * in];
            const double* x = &input.value[b * in];
            double* gw = &g.weight.value[o * in];
            double* gx = &g.input.value[b * in];
            for (std::size_t i = 0; i < in; ++i) {
                gw[i] += go * x[i];
                gx[i] += go * w[i];
            }
        }
    return g;
}

namespace detail {
inline void accumulate(Tensor& param, const Tensor& delta) {
    for (std::size_t i = 0; i < param.numel(); ++i) param.grad[i] += delta.value[i];
}
}  // namespace detail

// ----------------------------------------------------------------------------
// Layers
// ----------------------------------------------------------------------------

struct Conv1d {
    Tensor weight;  // out x in x kernel
    Tensor bias;    // out
    std::size_t stride = 1;
    std::size_t padding = 0;

    Conv1d() = default;
    Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride_,
           std::size_t padding_, std::mt19937_64& rng)
        : weight({out_channels, in_channels, kernel}), bias({out_channels}), stride(stride_), padding(padding_) {
        detail::uniform_fill(weight, 1.0 / std::sqrt(static_cast<double>(in_channels * kernel)), rng);
    }

    std::size_t output_length(std::size_t len) const {
        return conv1d_output_length(len, weight.dim(2), stride, padding);
    }

    Tensor forward(const Tensor& x, Mode, Cache& cache) {
        cache.saved = {x};
        return conv1d_forward(x, weight, bias, stride, padding);
    }

    Tensor backward(const Cache& cache, const Tensor& grad_out) {
        auto g = conv1d_backward(grad_out, cache.saved.at(0), weight, stride, padding);
        detail::accumulate(weight, g.weight);
        detail::accumulate(bias, g.bias);
        return std::move(g.input);
    }

    void parameters(const std::string& prefix, std::vector<NamedTensor>& out) {
        out.push_back({prefix + "weight", &weight});
        out.push_back({prefix + "bias", &bias});
    }
    void buffers(const std::string&, std::vector<NamedTensor>&) {}
};

struct ConvTranspose1d {
    Tensor weight;  // in x out x kernel
    Tensor bias;    // out
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t output_padding = 0;

    ConvTranspose1d() = default;
    ConvTranspose1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride_,
                    std::size_t padding_, std::size_t output_padding_, std::mt19937_64& rng)
        : weight({in_channels, out_channels, kernel}),
          bias({out_channels}),
          stride(stride_),
          padding(padding_),
          output_padding(output_padding_) {
        detail::uniform_fill(weight, 1.0 / std::sqrt(static_cast<double>(in_channels * kernel)), rng);
    }

    std::size_t output_length(std::size_t len) const {
        return conv_transpose1d_output_length(len, weight.dim(2), stride, padding, output_padding);
    }

    Tensor forward(const Tensor& x, Mode, Cache& cache) {
        cache.saved = {x};
        return conv_transpose1d_forward(x, weight, bias, stride, padding, output_padding);
    }

    Tensor backward(const Cache& cache, const Tensor& grad_out) {
        auto g = conv_transpose1d_backward(grad_out, cache.saved.at(0), weight, stride, padding, output_padding);
        detail::accumulate(weight, g.weight);
        detail::accumulate(bias, g.bias);
        return std::move(g.input);
    }

    void parameters(const std::string& prefix, std::vector<NamedTensor>& out) {
        out.push_back({prefix + "weight", &weight});
        out.push_back({prefix + "bias", &bias});
    }
    void buffers(const std::string&, std::vector<NamedTensor>&) {}
};

/// Per-channel normalization over (batch, length) for [B,C,L] or [B,C] inputs.
struct BatchNorm1d {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    BatchNorm1d() = default;
    explicit BatchNorm1d(std::size_t channels)
        : gamma({channels}, 1.0), beta({channels}), running_mean({channels}), running_var({channels}, 1.0) {}

    std::size_t channels() const { return gamma.numel(); }

    Tensor forward(const Tensor& x, Mode mode, Cache& cache) {
        if (x.rank() != 2 && x.rank() != 3)
            throw ValidationError("batchnorm1d: expected [B,C] or [B,C,L], got " + shape_string(x.shape));
        const std::size_t batch = x.dim(0), ch = x.dim(1), len = x.rank() == 3 ? x.dim(2) : 1;
        if (ch != channels())
            throw ValidationError("batchnorm1d: expected " + std::to_string(channels()) + " channels, got " +
                                  std::to_string(ch));
        const std::size_t count = batch * len;
        const bool batch_stats = mode != Mode::eval;
        if (batch_stats && count < 2)
            throw ValidationError("batchnorm1d: training mode needs at least 2 values per channel");

        Tensor xhat = x.zeros_like();
        Tensor out = x.zeros_like();
        std::vector<double> inv_std(ch);
        for (std::size_t c = 0; c < ch; ++c) {
            double mean = running_mean.value[c];
            double var = running_var.value[c];
            if (batch_stats) {
                mean = 0.0;
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t l = 0; l < len; ++l) mean += x.value[(b * ch + c) * len + l];
                mean /= static_cast<double>(count);
                var = 0.0;
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t l = 0; l < len; ++l) {
                        const double d = x.value[(b * ch + c) * len + l] - mean;
                        var += d * d;
                    }
                var /= static_cast<double>(count);
                if (mode == Mode::train) {
                    const double unbiased = var * static_cast<double>(count) / static_cast<double>(count - 1);
                    running_mean.value[c] = (1.0 - momentum) * running_mean.value[c] + momentum * mean;
                    running_var.value[c] = (1.0 - momentum) * running_var.value[c] + momentum * unbiased;
                }
            }
            inv_std[c] = 1.0 / std::sqrt(var + eps);
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t l = 0; l < len; ++l) {
                    const std::size_t i = (b * ch + c) * len + l;
                    xhat.value[i] = (x.value[i] - mean) * inv_std[c];
                    out.value[i] = gamma.value[c] * xhat.value[i] + beta.value[c];
                }
        }
        cache.saved = {std::move(xhat)};
        cache.aux = std::move(inv_std);
        cache.aux.push_back(batch_stats ? 1.0 : 0.0);
        return out;
    }

    Tensor backward(const Cache& cache, const Tensor& grad_out) {
        const Tensor& xhat = cache.saved.at(0);
        const bool batch_stats = cache.aux.back() != 0.0;
        const std::size_t batch = xhat.dim(0), ch = xhat.dim(1), len = xhat.rank() == 3 ? xhat.dim(2) : 1;
        const double count = static_cast<double>(batch * len);
        Tensor gin = xhat.zeros_like();
        for (std::size_t c = 0; c < ch; ++c) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t l = 0; l < len; ++l) {
                    const std::size_t i = (b * ch + c) * len + l;
                    sum_g += grad_out.value[i];
                    sum_gx += grad_out.value[i] * xhat.value[i];
                }
            gamma.grad[c] += sum_gx;
            beta.grad[c] += sum_g;
            const double scale = gamma.value[c] * cache.aux[c];
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t l = 0; l < len; ++l) {
                    const std::size_t i = (b * ch + c) * len + l;
                    gin.value[i] = batch_stats
                                       ? scale * (grad_out.value[i] - sum_g / count - xhat.value[i] * sum_gx / count)
                                       : scale * grad_out.value[i];
                }
        }
        return gin;
    }

    void parameters(const std::string& prefix, std::vector<NamedTensor>& out) {
        out.push_back({prefix + "gamma", &gamma});
        out.push_back({prefix + "beta", &beta});
    }
    void buffers(const std::string& prefix, std::vector<NamedTensor>& out) {
        out.push_back({prefix + "running_mean", &running_mean});
        out.push_back({prefix + "running_var", &running_var});
    }
};

/// Normalizes over the last axis of each row, then applies a per-position affine map.
struct LayerNorm {
    Tensor gamma;
    Tensor beta;
    double eps = 1e-5;

    LayerNorm() = default;
    explicit LayerNorm(std::size_t features, double eps_ = 1e-5) : gamma({features}, 1.0), beta({features}), eps(eps_) {}

    std::size_t features() const { return gamma.numel(); }

    Tensor forward(const Tensor& x, Mode, Cache& cache) {
        const std::size_t n = features();
        if (x.rank() == 0 || x.shape.back() != n)
            throw ValidationError("layernorm: last axis must be " + std::to_string(n) + ", got " + shape_string(x.shape));
        const std::size_t rows = x.numel() / n;
        Tensor xhat = x.zeros_like();
        Tensor out = x.zeros_like();
        std::vector<double> inv_std(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* src = &x.value[r * n];
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += src[i];
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) var += (src[i] - mean) * (src[i] - mean);
            var /= static_cast<double>(n);
            inv_std[r] = 1.0 / std::sqrt(var + eps);
            for (std::size_t i = 0; i < n; ++i) {
                const double h = (src[i] - mean) * inv_std[r];
                xhat.value[r * n + i] = h;
                out.value[r * n + i] = gamma.value[i] * h + beta.value[i];
            }
        }
        cache.saved = {std::move(xhat)};
        cache.aux = std::move(inv_std);
        return out;
    }

    Tensor backward(const Cache& cache, const Tensor& grad_out) {
        const Tensor& xhat = cache.saved.at(0);
        const std::size_t n = features();
        const std::size_t rows = xhat.numel() / n;
        Tensor gin = xhat.zeros_like();
        std::vector<double> dxhat(n);
        for (std::size_t r = 0; r < rows; ++r) {
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double g = grad_out.value[r * n + i];
                gamma.grad[i] += g * xhat.value[r * n + i];
                beta.grad[i] += g;
                dxhat[i] = g * gamma.value[i];
                sum_d += dxhat[i];
                sum_dx += dxhat[i] * xhat.value[r * n + i];
            }
            const double nn = static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i)
                gin.value[r * n + i] = cache.aux[r] * (dxhat[i] - sum_d / nn - xhat.value[r * n + i] * sum_dx / nn);
        }
        return gin;
    }

    void parameters(const std::string& prefix, std::vector<NamedTensor>& out) {
        out.push_back({prefix + "gamma", &gamma});
        out.push_back({prefix + "beta", &beta});
    }
    void buffers(const std::string&, std::vector<NamedTensor>&) {}
};

struct Linear {
    Tensor weight;  // out x in
    Tensor bias;

    Linear() = default;
    Linear(std::size_t in_features, std::size_t out_features, std::mt19937_64& rng)
        : weight({out_features, in_features}), bias({out_features}) {
        detail::uniform_fill(weight, 1.0 / std::sqrt(static_cast<double>(in_features)), rng);
    }

    Tensor forward(const Tensor& x, Mode, Cache& cache) {
        cache.saved = {x};
        return linear_forward(x, weight, bias);
    }

    Tensor backward(const Cache& cache, const Tensor& grad_out) {
        auto g = linear_backward(grad_out, cache.saved.at(0), weight);
        detail::accumulate(weight, g.weight);
        detail::accumulate(bias, g.bias);
        return std::move(g.input);
    }

    void parameters(const std::string& prefix, std::vector<NamedTensor>& out) {
        out.push_back({prefix + "weight", &weight});
        out.push_back({prefix + "bias", &bias});
    }
    void buffers(const std::string&, std::vector<NamedTensor>&) {}
};

struct ReLU {
    Tensor forward(const Tensor& x, Mode, Cache& cache) {
        cache.saved = {x};
        return relu_forward(x);
    }
    Tensor backward(const Cache& cache, const Tensor& grad_out) { return relu_backward(grad_out, cache.saved.at(0)); }
    void parameters(const std::string&, std::vector<NamedTensor>&) {}
    void buffers(const std::string&, std::vector<NamedTensor>&) {}
};

struct Sigmoid {
    Tensor forward(const Tensor& x, Mode, Cache& cache) {
        auto out = sigmoid_forward(x);
        cache.saved = {out};
        return out;
    }
    Tensor backward(const Cache& cache, const Tensor& grad_out) {
        return sigmoid_backward(grad_out, cache.saved.at(0));
    }
    void parameters(const std::string&, std::vector<NamedTensor>&) {}
    void buffers(const std::string&, std::vector<NamedTensor>&) {}
};

/// [B, d1, d2, ...] -> [B, d1*d2*...].
struct Flatten {
    Tensor forward(const Tensor& x, Mode, Cache& cache) {
        cache.aux.assign(x.shape.begin(), x.shape.end());
        return Tensor({x.dim(0), x.numel() / x.dim(0)}, x.value);
    }
    Tensor backward(const Cache& cache, const Tensor& grad_out) {
        Shape shape;
        for (double d : cache.aux) shape.push_back(static_cast<std::size_t>(d));
        return Tensor(std::move(shape), grad_out.value);
    }
    void parameters(const std::string&, std::vector<NamedTensor>&) {}
    void buffers(const std::string&, std::vector<NamedTensor>&) {}
};

// ----------------------------------------------------------------------------
// Sequential container
// ----------------------------------------------------------------------------

using Layer =
    std::variant<Conv1d, ConvTranspose1d, BatchNorm1d, LayerNorm, Linear, ReLU, Sigmoid, Flatten>;

struct Sequential {
    std::vector<Layer> layers;

    Tensor forward(const Tensor& x, Mode mode, Cache& cache) {
        cache.children.resize(layers.size());
        Tensor current = x;
        for (std::size_t i = 0; i < layers.size(); ++i)
            current = std::visit([&](auto& layer) { return layer.forward(current, mode, cache.children[i]); }, layers[i]);
        return current;
    }

    Tensor forward(const Tensor& x, Mode mode) {
        Cache scratch;
        return forward(x, mode, scratch);
    }

    Tensor backward(const Cache& cache, const Tensor& grad_out) {
        Tensor g = grad_out;
        for (std::size_t i = layers.size(); i-- > 0;)
            g = std::visit([&](auto& layer) { return layer.backward(cache.children.at(i), g); }, layers[i]);
        return g;
    }

    void parameters(const std::string& prefix, std::vector<NamedTensor>& out) {
        for (std::size_t i = 0; i < layers.size(); ++i)
            std::visit([&](auto& layer) { layer.parameters(prefix + std::to_string(i) + ".", out); }, layers[i]);
    }

    void buffers(const std::string& prefix, std::vector<NamedTensor>& out) {
        for (std::size_t i = 0; i < layers.size(); ++i)
            std::visit([&](auto& layer) { layer.buffers(prefix + std::to_string(i) + ".", out); }, layers[i]);
    }
};

inline void zero_grad(std::span<const NamedTensor> tensors) {
    for (const auto& t : tensors) t.tensor->zero_grad();
}

}  // namespace grlnet::nn
