// ============================================================================
// grlnet/model.hpp - GRLNet: global filter layer, local/regional generators,
// discriminator, adversarial training and the combined anomaly score
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "grlnet/errors.hpp"
#include "grlnet/nn/adam.hpp"
#include "grlnet/nn/checkpoint.hpp"
#include "grlnet/nn/layers.hpp"
#include "grlnet/nn/loss.hpp"
#include "grlnet/signal_io.hpp"
#include "grlnet/spectral.hpp"

namespace grlnet {

using nn::Cache;
using nn::Mode;
using nn::NamedTensor;
using nn::Tensor;

// ============================================================================
// Configuration
// ============================================================================

enum class SpectrumRepr { real_imag_channels, magnitude };

inline SpectrumRepr parse_spectrum_repr(std::string_view text) {
    if (text == "real_imag_channels") return SpectrumRepr::real_imag_channels;
    if (text == "magnitude") return SpectrumRepr::magnitude;
    throw ValidationError("unknown spectrum representation '" + std::string(text) + "'");
}

inline std::string_view to_string(SpectrumRepr r) {
    return r == SpectrumRepr::magnitude ? "magnitude" : "real_imag_channels";
}

struct ModelConfig {
    std::size_t window_size = 512;
    SpectrumRepr repr = SpectrumRepr::real_imag_channels;
    bool filter_trainable = true;
    bool orthonormal_spectrum = true;  // scale the half spectrum by 1/sqrt(L)
    std::vector<std::size_t> generator_channels{16, 32, 64};
    std::size_t local_kernel = 3;
    std::size_t regional_kernel = 7;
    std::vector<std::size_t> discriminator_channels{16, 32};
    std::size_t discriminator_kernel = 5;
    bool discriminator_batch_norm = false;
    std::uint64_t init_seed = 0;

    std::size_t bins() const { return spectral::half_spectrum_size(window_size); }
    std::size_t spectrum_channels() const { return repr == SpectrumRepr::magnitude ? 1 : 2; }

    void validate() const {
        if (window_size < 2) throw ValidationError("model: window size must be at least 2");
        if (generator_channels.empty()) throw ValidationError("model: generator needs at least one stage");
        if (discriminator_channels.empty()) throw ValidationError("model: discriminator needs at least one stage");
        for (auto k : {local_kernel, regional_kernel, discriminator_kernel})
            if (k == 0 || k % 2 == 0) throw ValidationError("model: kernel lengths must be odd");
        for (auto c : generator_channels)
            if (c == 0) throw ValidationError("model: channel widths must be positive");
        for (auto c : discriminator_channels)
            if (c == 0) throw ValidationError("model: channel widths must be positive");
    }
};

struct TrainConfig {
    double alpha = 0.5;   // balanced discriminant factor
    double gamma = 0.2;   // balanced adversarial factor
    double lambda = 0.5;  // weighting of the reported composite loss
    double sigma = 0.1;   // input noise, relative to per-sample std
    double lr_g = 1e-3;
    double lr_d = 1e-4;
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    std::uint64_t rng_seed = 0;

    void validate() const {
        auto unit = [](double v, const char* name) {
            if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string("train: ") + name + " must lie in [0,1]");
        };
        unit(alpha, "alpha");
        unit(gamma, "gamma");
        unit(lambda, "lambda");
        if (!(sigma >= 0.0)) throw ValidationError("train: sigma must be non-negative");
        if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ValidationError("train: learning rates must be positive");
        if (batch_size == 0) throw ValidationError("train: batch size must be positive");
    }
};

struct DetectConfig {
    double beta = 0.5;  // comprehensive output factor
    std::optional<double> tau;

    void validate() const {
        if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("detect: beta must lie in [0,1]");
    }
};

// ============================================================================
// Global filter layer: layernorm -> half-spectrum FFT -> learnable complex filter
// ============================================================================

struct GlobalFilterLayer {
    nn::LayerNorm norm;
    Tensor filter_re;  // [bins], initialized to ones
    Tensor filter_im;  // [bins], initialized to zeros
    SpectrumRepr repr = SpectrumRepr::real_imag_channels;
    bool trainable = true;
    double scale = 1.0;

    GlobalFilterLayer() = default;
    GlobalFilterLayer(std::size_t window_len, SpectrumRepr repr_, bool trainable_, bool orthonormal)
        : norm(window_len),
          filter_re({spectral::half_spectrum_size(window_len)}, 1.0),
          filter_im({spectral::half_spectrum_size(window_len)}, 0.0),
          repr(repr_),
          trainable(trainable_),
          scale(orthonormal ? 1.0 / std::sqrt(static_cast<double>(window_len)) : 1.0) {}

    std::size_t window_len() const { return norm.features(); }
    std::size_t bins() const { return filter_re.numel(); }
    std::size_t channels() const { return repr == SpectrumRepr::magnitude ? 1 : 2; }

    /// [B,1,L] or [B,L] -> [B,C,bins].
    Tensor forward(const Tensor& windows, Mode mode, Cache& cache) {
        const std::size_t len = window_len();
        if (windows.shape.back() != len || windows.numel() % len != 0)
            throw ValidationError("global filter: expected windows of length " + std::to_string(len) + ", got shape " +
                                  nn::shape_string(windows.shape));
        const std::size_t batch = windows.numel() / len;
        const std::size_t nb = bins();
        cache.children.resize(1);
        const Tensor normed = norm.forward(windows, mode, cache.children[0]);

        Tensor spectrum({batch, 2, nb});  // pre-filter, scaled
        Tensor filtered({batch, 2, nb});
        Tensor out({batch, channels(), nb});
        for (std::size_t b = 0; b < batch; ++b) {
            const auto h = spectral::rfft_half(std::span<const double>(&normed.value[b * len], len));
            for (std::size_t k = 0; k < nb; ++k) {
                const double yr = scale * h.bins[k].real();
                const double yi = scale * h.bins[k].imag();
                const double zr = yr * filter_re.value[k] - yi * filter_im.value[k];
                const double zi = yr * filter_im.value[k] + yi * filter_re.value[k];
                spectrum.at(b, 0, k) = yr;
                spectrum.at(b, 1, k) = yi;
                filtered.at(b, 0, k) = zr;
                filtered.at(b, 1, k) = zi;
                if (repr == SpectrumRepr::real_imag_channels) {
                    out.at(b, 0, k) = zr;
                    out.at(b, 1, k) = zi;
                } else {
                    out.at(b, 0, k) = std::sqrt(zr * zr + zi * zi + kMagnitudeFloor);
                }
            }
        }
        cache.saved = {std::move(spectrum), std::move(filtered)};
        cache.aux = {static_cast<double>(windows.rank())};
        return out;
    }

    Tensor forward(const Tensor& windows, Mode mode) {
        Cache scratch;
        return forward(windows, mode, scratch);
    }

    /// Returns the gradient w.r.t. the windows; accumulates filter and norm gradients.
    Tensor backward(const Cache& cache, const Tensor& grad_out) {
        const Tensor& spectrum = cache.saved.at(0);
        const Tensor& filtered = cache.saved.at(1);
        const std::size_t batch = spectrum.dim(0), nb = bins(), len = window_len();
        nn::require_shape(grad_out, {batch, channels(), nb}, "global filter grad_out");
        Tensor grad_normed({batch, len});
        std::vector<spectral::Complex> padded(len);
        for (std::size_t b = 0; b < batch; ++b) {
            std::fill(padded.begin(), padded.end(), spectral::Complex{});
            for (std::size_t k = 0; k < nb; ++k) {
                double gzr, gzi;
                if (repr == SpectrumRepr::real_imag_channels) {
                    gzr = grad_out.at(b, 0, k);
                    gzi = grad_out.at(b, 1, k);
                } else {
                    const double zr = filtered.at(b, 0, k), zi = filtered.at(b, 1, k);
                    const double m = std::sqrt(zr * zr + zi * zi + kMagnitudeFloor);
                    gzr = grad_out.at(b, 0, k) * zr / m;
                    gzi = grad_out.at(b, 0, k) * zi / m;
                }
                const double yr = spectrum.at(b, 0, k), yi = spectrum.at(b, 1, k);
                const double hr = filter_re.value[k], hi = filter_im.value[k];
                filter_re.grad[k] += gzr * yr + gzi * yi;
                filter_im.grad[k] += -gzr * yi + gzi * yr;
                const double gyr = gzr * hr + gzi * hi;
                const double gyi = -gzr * hi + gzi * hr;
                padded[k] = {scale * gyr, scale * gyi};
            }
            // Adjoint of the truncated forward DFT: dx_n = Re(sum_k G_k e^{+2 pi j nk/L}).
            const auto back = spectral::ifft(padded);
            for (std::size_t n = 0; n < len; ++n) grad_normed.value[b * len + n] = static_cast<double>(len) * back[n].real();
        }
        if (cache.children.at(0).saved.at(0).shape != grad_normed.shape)
            grad_normed.shape = cache.children[0].saved[0].shape;
        return norm.backward(cache.children[0], grad_normed);
    }

    void parameters(const std::string& prefix, std::vector<NamedTensor>& out) {
        norm.parameters(prefix + "norm.", out);
        out.push_back({prefix + "filter_re", &filter_re});
        out.push_back({prefix + "filter_im", &filter_im});
    }

    static constexpr double kMagnitudeFloor = 1e-12;
};

/// Single-window convenience: returns [1, C, bins].
inline Tensor global_filter_forward(std::span<const double> window, GlobalFilterLayer& layer) {
    if (window.size() != layer.window_len())
        throw ValidationError("global filter: window length " + std::to_string(window.size()) + " != configured " +
                              std::to_string(layer.window_len()));
    return layer.forward(Tensor({1, 1, window.size()}, std::vector<double>(window.begin(), window.end())), Mode::eval);
}

// ============================================================================
// Networks
// ============================================================================

/// Stride-2 conv encoder mirrored by transposed-conv decoder; output shape equals input shape.
inline nn::Sequential make_generator(std::size_t in_channels, std::size_t length, std::size_t kernel,
                                     const std::vector<std::size_t>& channels, std::mt19937_64& rng) {
    const std::size_t pad = (kernel - 1) / 2;
    std::vector<std::size_t> lengths{length};
    nn::Sequential net;
    std::size_t prev = in_channels;
    for (auto ch : channels) {
        nn::Conv1d conv(prev, ch, kernel, 2, pad, rng);
        lengths.push_back(conv.output_length(lengths.back()));
        net.layers.emplace_back(std::move(conv));
        net.layers.emplace_back(nn::BatchNorm1d(ch));
        net.layers.emplace_back(nn::ReLU{});
        prev = ch;
    }
    for (std::size_t s = channels.size(); s-- > 0;) {
        const std::size_t out_ch = s == 0 ? in_channels : channels[s - 1];
        const std::size_t target = lengths[s];
        const std::size_t base = (lengths[s + 1] - 1) * 2 + kernel - 2 * pad;
        if (target < base || target - base > 1)
            throw ValidationError("generator: cannot mirror encoder length " + std::to_string(target));
        net.layers.emplace_back(nn::ConvTranspose1d(prev, out_ch, kernel, 2, pad, target - base, rng));
        if (s != 0) {
            net.layers.emplace_back(nn::BatchNorm1d(out_ch));
            net.layers.emplace_back(nn::ReLU{});
        }
        prev = out_ch;
    }
    return net;
}

/// Conv stages (stride 2, optional batch norm, ReLU) followed by a fully connected sigmoid head: [B,C,L] -> [B,1].
inline nn::Sequential make_discriminator(std::size_t in_channels, std::size_t length, std::size_t kernel,
                                         const std::vector<std::size_t>& channels, bool batch_norm,
                                         std::mt19937_64& rng) {
    const std::size_t pad = (kernel - 1) / 2;
    nn::Sequential net;
    std::size_t prev = in_channels, len = length;
    for (auto ch : channels) {
        nn::Conv1d conv(prev, ch, kernel, 2, pad, rng);
        len = conv.output_length(len);
        net.layers.emplace_back(std::move(conv));
        if (batch_norm) net.layers.emplace_back(nn::BatchNorm1d(ch));
        net.layers.emplace_back(nn::ReLU{});
        prev = ch;
    }
    net.layers.emplace_back(nn::Flatten{});
    net.layers.emplace_back(nn::Linear(prev * len, 1, rng));
    net.layers.emplace_back(nn::Sigmoid{});
    return net;
}

enum class GeneratorKind { local, regional };

struct GrlnetModel {
    ModelConfig config;
    GlobalFilterLayer gfl;
    nn::Sequential g_local;
    nn::Sequential g_regional;
    nn::Sequential discriminator;

    GrlnetModel() = default;
    explicit GrlnetModel(ModelConfig cfg) : config(std::move(cfg)) {
        config.validate();
        std::mt19937_64 rng(config.init_seed);
        gfl = GlobalFilterLayer(config.window_size, config.repr, config.filter_trainable, config.orthonormal_spectrum);
        const std::size_t c = config.spectrum_channels(), nb = config.bins();
        g_local = make_generator(c, nb, config.local_kernel, config.generator_channels, rng);
        g_regional = make_generator(c, nb, config.regional_kernel, config.generator_channels, rng);
        discriminator = make_discriminator(c, nb, config.discriminator_kernel, config.discriminator_channels,
                                           config.discriminator_batch_norm, rng);
    }

    nn::Sequential& generator(GeneratorKind kind) { return kind == GeneratorKind::local ? g_local : g_regional; }

    /// Parameters updated in the discriminator step (the global filter layer rides with D).
    std::vector<NamedTensor> discriminator_block() {
        std::vector<NamedTensor> out;
        if (gfl.trainable) gfl.parameters("gfl.", out);
        discriminator.parameters("d.", out);
        return out;
    }

    std::vector<NamedTensor> generator_block() {
        std::vector<NamedTensor> out;
        g_local.parameters("g_local.", out);
        g_regional.parameters("g_regional.", out);
        return out;
    }

    /// Every parameter and buffer, in a stable order.
    std::vector<NamedTensor> state() {
        std::vector<NamedTensor> out;
        gfl.parameters("gfl.", out);
        g_local.parameters("g_local.", out);
        g_local.buffers("g_local.", out);
        g_regional.parameters("g_regional.", out);
        g_regional.buffers("g_regional.", out);
        discriminator.parameters("d.", out);
        discriminator.buffers("d.", out);
        return out;
    }
};

// ----------------------------------------------------------------------------
// Batch preparation
// ----------------------------------------------------------------------------

/// Z-scores each selected window and stacks them into [B,1,L].
inline Tensor windows_to_tensor(std::span<const std::vector<double>> windows, std::span<const std::size_t> indices) {
    if (indices.empty()) throw ValidationError("empty batch");
    const std::size_t len = windows[indices[0]].size();
    Tensor t({indices.size(), 1, len});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const auto& w = windows[indices[b]];
        if (w.size() != len) throw ValidationError("windows in a batch must share one length");
        const auto z = normalize_window(w);
        std::copy(z.begin(), z.end(), t.value.begin() + static_cast<std::ptrdiff_t>(b * len));
    }
    return t;
}

inline Tensor windows_to_tensor(std::span<const std::vector<double>> windows) {
    std::vector<std::size_t> idx(windows.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return windows_to_tensor(windows, idx);
}

/// Gaussian noise with std sigma * (std of each sample's values).
inline Tensor add_noise(const Tensor& input, double sigma, std::mt19937_64& rng) {
    if (sigma < 0.0) throw ValidationError("add_noise: sigma must be non-negative");
    Tensor out(input.shape, input.value);
    if (sigma == 0.0) return out;
    const std::size_t batch = input.dim(0);
    const std::size_t per = input.numel() / batch;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* src = &input.value[b * per];
        const double mean = std::accumulate(src, src + per, 0.0) / static_cast<double>(per);
        double var = 0.0;
        for (std::size_t i = 0; i < per; ++i) var += (src[i] - mean) * (src[i] - mean);
        const double sd = sigma * std::sqrt(var / static_cast<double>(per));
        for (std::size_t i = 0; i < per; ++i) out.value[b * per + i] += sd * gauss(rng);
    }
    return out;
}

// ============================================================================
// Training (block-wise: discriminator step, then generator step)
// ============================================================================

/// Everything the two update steps share for one minibatch.
struct BatchForward {
    Tensor real;  // global-filter output X
    Cache gfl_cache;
    Tensor noisy;  // X with added noise
    Tensor rec_local;
    Tensor rec_regional;
    Cache local_cache;
    Cache regional_cache;
};

struct DiscriminatorLosses {
    double bce_real = 0.0;
    double bce_fake_local = 0.0;
    double bce_fake_regional = 0.0;
    double total = 0.0;
};

struct GeneratorLosses {
    double mse_local = 0.0;
    double mse_regional = 0.0;
    double bce_adv_local = 0.0;
    double bce_adv_regional = 0.0;
    double total = 0.0;
};

/// Adam state and RNG carried across minibatches.
struct TrainingState {
    nn::AdamState adam_d;
    nn::AdamState adam_g;
    std::mt19937_64 rng;

    TrainingState(GrlnetModel& model, const TrainConfig& cfg)
        : adam_d(cfg.lr_d), adam_g(cfg.lr_g), rng(cfg.rng_seed ^ 0x9e3779b97f4a7c15ULL) {
        adam_d.init(model.discriminator_block());
        adam_g.init(model.generator_block());
    }
};

inline BatchForward forward_generators(GrlnetModel& model, const Tensor& windows, const TrainConfig& cfg,
                                       std::mt19937_64& rng) {
    BatchForward f;
    f.real = model.gfl.forward(windows, Mode::train, f.gfl_cache);
    f.noisy = add_noise(f.real, cfg.sigma, rng);
    f.rec_local = model.g_local.forward(f.noisy, Mode::train, f.local_cache);
    f.rec_regional = model.g_regional.forward(f.noisy, Mode::train, f.regional_cache);
    return f;
}

/// min alpha*BCE(D(X), 0) + (1-alpha)*(BCE(D(G_l), 1) + BCE(D(G_r), 1)); updates D (and the filter layer) only.
inline DiscriminatorLosses discriminator_step(GrlnetModel& model, BatchForward& f, const TrainConfig& cfg,
                                              nn::AdamState& adam) {
    auto block = model.discriminator_block();
    nn::zero_grad(block);
    Cache c_real, c_local, c_regional;
    const Tensor d_real = model.discriminator.forward(f.real, Mode::train, c_real);
    const Tensor d_local = model.discriminator.forward(f.rec_local, Mode::train, c_local);
    const Tensor d_regional = model.discriminator.forward(f.rec_regional, Mode::train, c_regional);

    auto l_real = nn::bce_loss(d_real, 0.0);
    auto l_local = nn::bce_loss(d_local, 1.0);
    auto l_regional = nn::bce_loss(d_regional, 1.0);
    DiscriminatorLosses out{l_real.value, l_local.value, l_regional.value, 0.0};
    out.total = cfg.alpha * l_real.value + (1.0 - cfg.alpha) * (l_local.value + l_regional.value);

    auto scaled = [](Tensor g, double s) {
        for (auto& v : g.value) v *= s;
        return g;
    };
    const Tensor g_real_in =
        model.discriminator.backward(c_real, scaled(std::move(l_real.grad), cfg.alpha));
    model.discriminator.backward(c_local, scaled(std::move(l_local.grad), 1.0 - cfg.alpha));
    model.discriminator.backward(c_regional, scaled(std::move(l_regional.grad), 1.0 - cfg.alpha));
    if (model.gfl.trainable) model.gfl.backward(f.gfl_cache, g_real_in);
    nn::adam_step(block, adam);
    return out;
}

/// min (1-gamma)*(MSE_l + MSE_r) + gamma*(BCE(D(G_l), 0) + BCE(D(G_r), 0)); updates both generators only.
inline GeneratorLosses generator_step(GrlnetModel& model, BatchForward& f, const TrainConfig& cfg,
                                      nn::AdamState& adam) {
    auto block = model.generator_block();
    nn::zero_grad(block);
    GeneratorLosses out;
    auto branch = [&](nn::Sequential& gen, const Tensor& rec, const Cache& gen_cache, double& mse, double& adv) {
        Cache c;
        // Batch statistics, but D's running statistics stay untouched by the generator step.
        const Tensor d_out = model.discriminator.forward(rec, Mode::train_frozen_stats, c);
        auto l_adv = nn::bce_loss(d_out, 0.0);
        auto l_mse = nn::mse_loss(rec, f.real);
        mse = l_mse.value;
        adv = l_adv.value;
        for (auto& v : l_adv.grad.value) v *= cfg.gamma;
        Tensor grad_rec = model.discriminator.backward(c, l_adv.grad);
        for (std::size_t i = 0; i < grad_rec.numel(); ++i) grad_rec.value[i] += (1.0 - cfg.gamma) * l_mse.grad.value[i];
        gen.backward(gen_cache, grad_rec);
    };
    branch(model.g_local, f.rec_local, f.local_cache, out.mse_local, out.bce_adv_local);
    branch(model.g_regional, f.rec_regional, f.regional_cache, out.mse_regional, out.bce_adv_regional);
    out.total = (1.0 - cfg.gamma) * (out.mse_local + out.mse_regional) +
                cfg.gamma * (out.bce_adv_local + out.bce_adv_regional);
    nn::adam_step(block, adam);
    return out;
}

struct EpochLoss {
    std::size_t epoch = 0;  // 1-based
    double d_loss = 0.0;
    double g_loss_recon = 0.0;
    double g_loss_adv = 0.0;
    double composite = 0.0;  // lambda * L_{G+D} + (1 - lambda) * L_R, diagnostic only
};

using EpochCallback = std::function<void(const EpochLoss&, GrlnetModel&)>;

/// Trains on normal windows only. Calls on_epoch after every epoch (checkpointing hook).
inline std::vector<EpochLoss> train(GrlnetModel& model, const WindowSet& windows, const TrainConfig& cfg,
                                    const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (windows.empty()) throw ValidationError("train: empty training set");
    for (std::size_t i = 0; i < windows.count(); ++i) {
        if (windows.labels.size() > i && windows.labels[i] == Label::anomalous)
            throw ValidationError("train: anomalous window from '" + windows.source_ids[i] +
                                  "' in one-class training data");
        if (windows.windows[i].size() != model.config.window_size)
            throw ValidationError("train: window length " + std::to_string(windows.windows[i].size()) +
                                  " does not match model window " + std::to_string(model.config.window_size));
    }

    TrainingState state(model, cfg);
    std::vector<std::size_t> order(windows.count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<EpochLoss> trace;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), state.rng);
        EpochLoss e{epoch};
        double d_sum = 0.0, recon_sum = 0.0, adv_sum = 0.0, gd_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const Tensor batch = windows_to_tensor(windows.windows, std::span(order).subspan(start, end - start));
            auto fwd = forward_generators(model, batch, cfg, state.rng);
            const auto d = discriminator_step(model, fwd, cfg, state.adam_d);
            const auto g = generator_step(model, fwd, cfg, state.adam_g);
            if (!std::isfinite(d.total) || !std::isfinite(g.total)) {
                std::ostringstream msg;
                msg << "train: non-finite loss at epoch " << epoch << " batch " << batches << " (d=" << d.total
                    << ", g=" << g.total << ")";
                throw NumericalError(msg.str());
            }
            d_sum += d.total;
            recon_sum += g.mse_local + g.mse_regional;
            adv_sum += g.bce_adv_local + g.bce_adv_regional;
            gd_sum += 2.0 * d.bce_real + d.bce_fake_local + d.bce_fake_regional;
            ++batches;
        }
        const double nb = static_cast<double>(batches);
        e.d_loss = d_sum / nb;
        e.g_loss_recon = recon_sum / nb;
        e.g_loss_adv = adv_sum / nb;
        e.composite = cfg.lambda * (gd_sum / nb) + (1.0 - cfg.lambda) * e.g_loss_recon;
        trace.push_back(e);
        if (on_epoch) on_epoch(e, model);
    }
    return trace;
}

// ============================================================================
// Scoring
// ============================================================================

/// Per-window network outputs from which every detection strategy is assembled.
struct ScoreComponents {
    double d_real = 0.0;       // D(X)
    double d_local = 0.0;      // D(G_local(X))
    double d_regional = 0.0;   // D(G_regional(X))
    double mse_local = 0.0;    // ||G_local(X) - X||^2 / n
    double mse_regional = 0.0;
};

/// beta * (D(G_l) + D(G_r)) + (1 - beta) * D(X)
inline double anomaly_score(const ScoreComponents& c, double beta) {
    return beta * (c.d_local + c.d_regional) + (1.0 - beta) * c.d_real;
}

enum class DetectionStrategy { d_real, g_local, g_regional, d_local, d_regional, d_generators, combined };

inline constexpr std::array<DetectionStrategy, 7> kAllStrategies{
    DetectionStrategy::d_real,     DetectionStrategy::g_local,      DetectionStrategy::g_regional,
    DetectionStrategy::d_local,    DetectionStrategy::d_regional,   DetectionStrategy::d_generators,
    DetectionStrategy::combined};

inline std::string_view to_string(DetectionStrategy s) {
    switch (s) {
        case DetectionStrategy::d_real: return "D(X)";
        case DetectionStrategy::g_local: return "G_local(X)";
        case DetectionStrategy::g_regional: return "G_regional(X)";
        case DetectionStrategy::d_local: return "D(G_local(X))";
        case DetectionStrategy::d_regional: return "D(G_regional(X))";
        case DetectionStrategy::d_generators: return "D(G_local(X))+D(G_regional(X))";
        case DetectionStrategy::combined: return "beta*(D(G_local(X))+D(G_regional(X)))+(1-beta)*D(X)";
    }
    return "unknown";
}

/// Generator-only strategies score by reconstruction error.
inline double strategy_score(const ScoreComponents& c, DetectionStrategy s, double beta = 0.5) {
    switch (s) {
        case DetectionStrategy::d_real: return c.d_real;
        case DetectionStrategy::g_local: return c.mse_local;
        case DetectionStrategy::g_regional: return c.mse_regional;
        case DetectionStrategy::d_local: return c.d_local;
        case DetectionStrategy::d_regional: return c.d_regional;
        case DetectionStrategy::d_generators: return c.d_local + c.d_regional;
        case DetectionStrategy::combined: return anomaly_score(c, beta);
    }
    return 0.0;
}

/// Eval-mode forward of all three networks. Does not modify the model.
inline std::vector<ScoreComponents> score_components(GrlnetModel& model, std::span<const std::vector<double>> windows,
                                                     std::size_t chunk = 64) {
    std::vector<ScoreComponents> out;
    out.reserve(windows.size());
    for (const auto& w : windows)
        if (w.size() != model.config.window_size)
            throw ValidationError("score: window length " + std::to_string(w.size()) + " does not match model window " +
                                  std::to_string(model.config.window_size));
    for (std::size_t start = 0; start < windows.size(); start += chunk) {
        const std::size_t end = std::min(windows.size(), start + chunk);
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const Tensor batch = windows_to_tensor(windows, idx);
        const Tensor x = model.gfl.forward(batch, Mode::eval);
        const Tensor rl = model.g_local.forward(x, Mode::eval);
        const Tensor rr = model.g_regional.forward(x, Mode::eval);
        const Tensor dx = model.discriminator.forward(x, Mode::eval);
        const Tensor dl = model.discriminator.forward(rl, Mode::eval);
        const Tensor dr = model.discriminator.forward(rr, Mode::eval);
        const std::size_t per = x.numel() / idx.size();
        for (std::size_t b = 0; b < idx.size(); ++b) {
            ScoreComponents c{dx.value[b], dl.value[b], dr.value[b], 0.0, 0.0};
            for (std::size_t i = 0; i < per; ++i) {
                const double el = rl.value[b * per + i] - x.value[b * per + i];
                const double er = rr.value[b * per + i] - x.value[b * per + i];
                c.mse_local += el * el;
                c.mse_regional += er * er;
            }
            c.mse_local /= static_cast<double>(per);
            c.mse_regional /= static_cast<double>(per);
            out.push_back(c);
        }
    }
    return out;
}

inline double anomaly_score(GrlnetModel& model, std::span<const double> window, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("anomaly_score: beta must lie in [0,1]");
    const std::vector<std::vector<double>> one{std::vector<double>(window.begin(), window.end())};
    return anomaly_score(score_components(model, one).front(), beta);
}

/// Scores at the threshold are anomalous.
inline Label classify(double score, double tau) { return score >= tau ? Label::anomalous : Label::normal; }

// ============================================================================
// Checkpoints
// ============================================================================

namespace detail {
inline std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}
inline std::vector<std::size_t> split_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(std::stoull(tok));
    return out;
}
}  // namespace detail

inline nn::Checkpoint make_checkpoint(GrlnetModel& model, std::size_t epoch) {
    nn::Checkpoint ckpt;
    const auto& c = model.config;
    ckpt.meta["epoch"] = std::to_string(epoch);
    ckpt.meta["window_size"] = std::to_string(c.window_size);
    ckpt.meta["repr"] = std::string(to_string(c.repr));
    ckpt.meta["filter_trainable"] = c.filter_trainable ? "1" : "0";
    ckpt.meta["orthonormal_spectrum"] = c.orthonormal_spectrum ? "1" : "0";
    ckpt.meta["generator_channels"] = detail::join(c.generator_channels);
    ckpt.meta["local_kernel"] = std::to_string(c.local_kernel);
    ckpt.meta["regional_kernel"] = std::to_string(c.regional_kernel);
    ckpt.meta["discriminator_channels"] = detail::join(c.discriminator_channels);
    ckpt.meta["discriminator_kernel"] = std::to_string(c.discriminator_kernel);
    ckpt.meta["discriminator_batch_norm"] = c.discriminator_batch_norm ? "1" : "0";
    ckpt.meta["init_seed"] = std::to_string(c.init_seed);
    const auto st = model.state();
    nn::append_tensors(ckpt, st);
    return ckpt;
}

inline GrlnetModel model_from_checkpoint(const nn::Checkpoint& ckpt) {
    ModelConfig c;
    try {
        c.window_size = std::stoull(ckpt.require_meta("window_size"));
        c.repr = parse_spectrum_repr(ckpt.require_meta("repr"));
        c.filter_trainable = ckpt.require_meta("filter_trainable") == "1";
        c.orthonormal_spectrum = ckpt.require_meta("orthonormal_spectrum") == "1";
        c.generator_channels = detail::split_sizes(ckpt.require_meta("generator_channels"));
        c.local_kernel = std::stoull(ckpt.require_meta("local_kernel"));
        c.regional_kernel = std::stoull(ckpt.require_meta("regional_kernel"));
        c.discriminator_channels = detail::split_sizes(ckpt.require_meta("discriminator_channels"));
        c.discriminator_kernel = std::stoull(ckpt.require_meta("discriminator_kernel"));
        c.discriminator_batch_norm = ckpt.require_meta("discriminator_batch_norm") == "1";
        c.init_seed = std::stoull(ckpt.require_meta("init_seed"));
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const ValidationError*>(&e)) throw;
        throw ValidationError(std::string("checkpoint: malformed model metadata: ") + e.what());
    }
    GrlnetModel model(c);
    nn::restore_tensors(ckpt, model.state());
    return model;
}

}  // namespace grlnet
