// ============================================================================
// grlnet/spectral.hpp - DFT / FFT engine
//
// Forward transforms are unnormalized, inverse transforms carry 1/N.
// Power-of-two lengths use an iterative radix-2 Cooley-Tukey transform; every
// other length goes through Bluestein's chirp-z algorithm built on top of it.
// ============================================================================
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace grlnet::spectral {

using Complex = std::complex<double>;
using FullSpectrum = std::vector<Complex>;

/// First floor(L/2)+1 bins of the spectrum of a real sequence of length L.
struct HalfSpectrum {
    std::vector<Complex> bins;
    std::size_t original_len = 0;
};

inline std::size_t half_spectrum_size(std::size_t len) { return len / 2 + 1; }

namespace detail {

inline void require_non_empty(std::size_t n, const char* what) {
    if (n == 0) throw std::invalid_argument(std::string(what) + ": empty input");
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// e^{sign * 2*pi*j * k / n}, with k reduced modulo n so the angle stays small.
inline Complex twiddle(std::size_t k, std::size_t n, double sign) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k % n) / static_cast<double>(n);
    return {std::cos(angle), std::sin(angle)};
}

// In-place iterative radix-2 transform. sign = -1 forward, +1 inverse (unscaled).
inline void radix2_inplace(std::vector<Complex>& a, double sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    std::vector<Complex> w(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) w[k] = twiddle(k, n, sign);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t stride = n / len;
        for (std::size_t start = 0; start < n; start += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const Complex u = a[start + k];
                const Complex v = a[start + k + half] * w[k * stride];
                a[start + k] = u + v;
                a[start + k + half] = u - v;
            }
        }
    }
}

// Chirp-z: X_k = w_k * sum_n (x_n w_n) conj(w_{k-n}),  w_n = e^{sign * pi*j * n^2 / N}.
inline std::vector<Complex> bluestein(std::span<const Complex> x, double sign) {
    const std::size_t n = x.size();
    const std::size_t m = next_power_of_two(2 * n - 1);
    std::vector<Complex> chirp(n);
    for (std::size_t i = 0; i < n; ++i) {
        // n^2 mod 2N keeps the angle exact for long transforms.
        const std::size_t sq = (i * i) % (2 * n);
        const double angle = sign * std::numbers::pi * static_cast<double>(sq) / static_cast<double>(n);
        chirp[i] = {std::cos(angle), std::sin(angle)};
    }
    std::vector<Complex> a(m), b(m);
    for (std::size_t i = 0; i < n; ++i) a[i] = x[i] * chirp[i];
    b[0] = std::conj(chirp[0]);
    for (std::size_t i = 1; i < n; ++i) b[i] = b[m - i] = std::conj(chirp[i]);
    radix2_inplace(a, -1.0);
    radix2_inplace(b, -1.0);
    for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
    radix2_inplace(a, +1.0);
    const double scale = 1.0 / static_cast<double>(m);
    std::vector<Complex> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * scale * chirp[k];
    return out;
}

inline std::vector<Complex> transform(std::span<const Complex> x, double sign) {
    if (x.size() == 1) return {x[0]};
    if (is_power_of_two(x.size())) {
        std::vector<Complex> a(x.begin(), x.end());
        radix2_inplace(a, sign);
        return a;
    }
    return bluestein(x, sign);
}

inline std::vector<Complex> to_complex(std::span<const double> x) {
    return std::vector<Complex>(x.begin(), x.end());
}

}  // namespace detail

// ----------------------------------------------------------------------------
// Reference O(N^2) transform
// ----------------------------------------------------------------------------

inline FullSpectrum dft_naive(std::span<const Complex> x) {
    detail::require_non_empty(x.size(), "dft_naive");
    const std::size_t n = x.size();
    FullSpectrum out(n);
    for (std::size_t k = 0; k < n; ++k) {
        Complex acc{0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) acc += x[i] * detail::twiddle(i * k, n, -1.0);
        out[k] = acc;
    }
    return out;
}

inline FullSpectrum dft_naive(std::span<const double> x) {
    const auto c = detail::to_complex(x);
    return dft_naive(std::span<const Complex>(c));
}

// ----------------------------------------------------------------------------
// Fast transforms
// ----------------------------------------------------------------------------

inline FullSpectrum fft(std::span<const Complex> x) {
    detail::require_non_empty(x.size(), "fft");
    return detail::transform(x, -1.0);
}

inline FullSpectrum fft(std::span<const double> x) {
    const auto c = detail::to_complex(x);
    return fft(std::span<const Complex>(c));
}

inline std::vector<Complex> ifft(std::span<const Complex> spectrum) {
    detail::require_non_empty(spectrum.size(), "ifft");
    auto out = detail::transform(spectrum, +1.0);
    const double scale = 1.0 / static_cast<double>(out.size());
    for (auto& v : out) v *= scale;
    return out;
}

inline HalfSpectrum rfft_half(std::span<const double> x) {
    detail::require_non_empty(x.size(), "rfft_half");
    auto full = fft(x);
    full.resize(half_spectrum_size(x.size()));
    // Exact zeros for the bins that are real by symmetry.
    full.front().imag(0.0);
    if (x.size() % 2 == 0) full.back().imag(0.0);
    return {std::move(full), x.size()};
}

/// Rebuilds the full conjugate-symmetric spectrum of length original_len.
inline FullSpectrum expand_half_spectrum(const HalfSpectrum& h) {
    const std::size_t len = h.original_len;
    if (len == 0) throw std::invalid_argument("half spectrum: original_len must be positive");
    if (h.bins.size() != half_spectrum_size(len))
        throw std::invalid_argument("half spectrum: expected " + std::to_string(half_spectrum_size(len)) +
                                    " bins, got " + std::to_string(h.bins.size()));
    FullSpectrum full(len);
    for (std::size_t k = 0; k < h.bins.size(); ++k) full[k] = h.bins[k];
    for (std::size_t k = h.bins.size(); k < len; ++k) full[k] = std::conj(h.bins[len - k]);
    return full;
}

inline std::vector<double> irfft_half(const HalfSpectrum& h, double imag_tolerance = 1e-9) {
    if (h.bins.empty()) throw std::invalid_argument("irfft_half: empty input");
    if (std::abs(h.bins.front().imag()) > imag_tolerance)
        throw std::invalid_argument("irfft_half: DC bin must be real");
    if (h.original_len % 2 == 0 && h.bins.size() == half_spectrum_size(h.original_len) &&
        std::abs(h.bins.back().imag()) > imag_tolerance)
        throw std::invalid_argument("irfft_half: Nyquist bin must be real");
    const auto full = expand_half_spectrum(h);
    const auto time = ifft(full);
    std::vector<double> out(time.size());
    for (std::size_t i = 0; i < time.size(); ++i) {
        if (std::abs(time[i].imag()) > imag_tolerance)
            throw std::runtime_error("irfft_half: imaginary residual exceeds tolerance");
        out[i] = time[i].real();
    }
    return out;
}

// ----------------------------------------------------------------------------
// Circular convolution
// ----------------------------------------------------------------------------

namespace detail {
inline void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                                    std::to_string(b) + ")");
    require_non_empty(a, what);
}
}  // namespace detail

inline std::vector<double> circular_convolve_naive(std::span<const double> h, std::span<const double> x) {
    detail::require_same_length(h.size(), x.size(), "circular_convolve_naive");
    const std::size_t n = x.size();
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 0; m < n; ++m) w[i] += h[m] * x[(i + n - m) % n];
    return w;
}

inline std::vector<double> circular_convolve_fft(std::span<const double> h, std::span<const double> x) {
    detail::require_same_length(h.size(), x.size(), "circular_convolve_fft");
    auto hf = fft(h);
    const auto xf = fft(x);
    for (std::size_t k = 0; k < hf.size(); ++k) hf[k] *= xf[k];
    const auto time = ifft(hf);
    std::vector<double> w(time.size());
    for (std::size_t i = 0; i < time.size(); ++i) w[i] = time[i].real();
    return w;
}

}  // namespace grlnet::spectral
