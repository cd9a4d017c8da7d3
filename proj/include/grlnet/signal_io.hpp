// ============================================================================
// grlnet/signal_io.hpp - loading, synthesizing and windowing acoustic signals
// ============================================================================
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "grlnet/errors.hpp"

namespace grlnet {

enum class Label { normal = 0, anomalous = 1 };

inline std::string_view to_string(Label label) { return label == Label::normal ? "normal" : "anomalous"; }

inline Label parse_label(std::string_view text) {
    if (text == "normal") return Label::normal;
    if (text == "anomalous") return Label::anomalous;
    throw ValidationError("unknown label '" + std::string(text) + "'");
}

struct Signal {
    std::vector<double> samples;
    double sample_rate = 0.0;
    std::optional<Label> label;
    std::string source_id;

    std::size_t size() const { return samples.size(); }

    void validate() const {
        if (samples.empty()) throw ValidationError("signal '" + source_id + "': empty sample payload");
        if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
            throw ValidationError("signal '" + source_id + "': sample rate must be positive");
        for (double v : samples)
            if (!std::isfinite(v)) throw ValidationError("signal '" + source_id + "': non-finite sample");
    }
};

struct WindowSpec {
    std::size_t window_size = 512;
    std::size_t step_size = 512;

    void validate() const {
        if (window_size < 2) throw ValidationError("window size must be at least 2");
        if (step_size < 1) throw ValidationError("step size must be at least 1");
    }
};

/// Sub-sequences cut from one or more signals, all of length spec.window_size.
struct WindowSet {
    WindowSpec spec;
    std::vector<std::vector<double>> windows;
    std::vector<std::optional<Label>> labels;
    std::vector<std::string> source_ids;
    std::vector<std::size_t> window_index;  // position of the window within its source

    std::size_t count() const { return windows.size(); }
    bool empty() const { return windows.empty(); }

    void append(const WindowSet& other) {
        windows.insert(windows.end(), other.windows.begin(), other.windows.end());
        labels.insert(labels.end(), other.labels.begin(), other.labels.end());
        source_ids.insert(source_ids.end(), other.source_ids.begin(), other.source_ids.end());
        window_index.insert(window_index.end(), other.window_index.begin(), other.window_index.end());
    }
};

inline std::size_t window_count(std::size_t signal_len, const WindowSpec& spec) {
    if (signal_len < spec.window_size) return 0;
    return (signal_len - spec.window_size) / spec.step_size + 1;
}

// ----------------------------------------------------------------------------
// Windowing, decimation, normalization
// ----------------------------------------------------------------------------

inline WindowSet sliding_window(const Signal& signal, const WindowSpec& spec) {
    spec.validate();
    if (signal.size() < spec.window_size)
        throw ValidationError("signal '" + signal.source_id + "' shorter than window (" +
                              std::to_string(signal.size()) + " < " + std::to_string(spec.window_size) + ")");
    WindowSet set;
    set.spec = spec;
    const std::size_t k = window_count(signal.size(), spec);
    set.windows.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto first = signal.samples.begin() + static_cast<std::ptrdiff_t>(i * spec.step_size);
        set.windows.emplace_back(first, first + static_cast<std::ptrdiff_t>(spec.window_size));
        set.labels.push_back(signal.label);
        set.source_ids.push_back(signal.source_id);
        set.window_index.push_back(i);
    }
    return set;
}

inline WindowSet sliding_window(std::span<const Signal> signals, const WindowSpec& spec) {
    WindowSet set;
    set.spec = spec;
    for (const auto& s : signals) set.append(sliding_window(s, spec));
    return set;
}

/// Keeps every factor-th sample starting at index 0. No anti-alias filtering.
inline Signal decimate(const Signal& signal, std::size_t factor) {
    if (factor == 0) throw ValidationError("decimation factor must be positive");
    if (factor == 1) return signal;
    if (factor >= signal.size())
        throw ValidationError("decimation factor " + std::to_string(factor) + " not smaller than signal length " +
                              std::to_string(signal.size()));
    Signal out;
    out.sample_rate = signal.sample_rate / static_cast<double>(factor);
    out.label = signal.label;
    out.source_id = signal.source_id;
    out.samples.reserve(signal.size() / factor + 1);
    for (std::size_t i = 0; i < signal.size(); i += factor) out.samples.push_back(signal.samples[i]);
    return out;
}

/// Z-score with population std; a constant window maps to zeros.
inline std::vector<double> normalize_window(std::span<const double> w) {
    if (w.empty()) throw ValidationError("normalize_window: empty window");
    const double n = static_cast<double>(w.size());
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / n;
    double var = 0.0;
    for (double v : w) var += (v - mean) * (v - mean);
    const double denom = std::sqrt(var / n) + 1e-8;
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = (w[i] - mean) / denom;
    return out;
}

// ----------------------------------------------------------------------------
// File formats
// ----------------------------------------------------------------------------

enum class SignalFormat { csv, wav_pcm16_mono };

inline SignalFormat format_from_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") return SignalFormat::wav_pcm16_mono;
    if (ext == ".csv" || ext == ".txt") return SignalFormat::csv;
    throw ValidationError("cannot infer signal format from '" + path.string() + "'");
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path.string() + "'");
    return std::move(buf).str();
}

inline std::uint32_t read_u32le(std::string_view bytes, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
    return v;
}

inline std::uint16_t read_u16le(std::string_view bytes, std::size_t at) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[at]) |
                                      (static_cast<unsigned char>(bytes[at + 1]) << 8));
}

inline void put_u32le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u16le(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

inline std::vector<double> parse_csv_samples(std::string_view text) {
    std::vector<double> out;
    std::size_t pos = 0;
    auto is_sep = [](char c) { return c == ',' || c == '\n' || c == '\r' || c == ' ' || c == '\t'; };
    // Skip a UTF-8 byte order mark.
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
    while (pos < text.size()) {
        while (pos < text.size() && is_sep(text[pos])) ++pos;
        if (pos >= text.size()) break;
        std::size_t end = pos;
        while (end < text.size() && !is_sep(text[end])) ++end;
        const std::string_view token = text.substr(pos, end - pos);
        double value = 0.0;
        const char* first = token.data();
        if (!token.empty() && token.front() == '+') ++first;
        const auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
        if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(value))
            throw ValidationError("malformed CSV value '" + std::string(token) + "'");
        out.push_back(value);
        pos = end;
    }
    return out;
}

inline std::vector<double> parse_wav_pcm16_mono(std::string_view bytes, double& sample_rate) {
    if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE")
        throw ValidationError("malformed header: not a RIFF/WAVE file");
    std::size_t pos = 12;
    bool have_fmt = false;
    std::uint16_t channels = 0, bits = 0;
    std::uint32_t rate = 0;
    while (pos + 8 <= bytes.size()) {
        const std::string_view id = bytes.substr(pos, 4);
        const std::uint32_t size = detail::read_u32le(bytes, pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) {
            if (id == "data" && have_fmt) {
                // Truncated data chunk: take whatever full samples are present.
            } else {
                throw ValidationError("malformed header: chunk '" + std::string(id) + "' overruns file");
            }
        }
        if (id == "fmt ") {
            if (size < 16) throw ValidationError("malformed header: fmt chunk too short");
            const std::uint16_t format = detail::read_u16le(bytes, body);
            channels = detail::read_u16le(bytes, body + 2);
            rate = detail::read_u32le(bytes, body + 4);
            bits = detail::read_u16le(bytes, body + 14);
            if (format != 1) throw ValidationError("unsupported WAV encoding (PCM format code 1 required)");
            if (channels != 1)
                throw ValidationError("multi-channel WAV rejected (" + std::to_string(channels) + " channels; mono only)");
            if (bits != 16) throw ValidationError("unsupported WAV bit depth " + std::to_string(bits) + " (16 required)");
            if (rate == 0) throw ValidationError("malformed header: zero sample rate");
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw ValidationError("malformed header: data chunk before fmt chunk");
            const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);
            const std::size_t count = available / 2;
            if (count == 0) throw ValidationError("empty sample payload");
            std::vector<double> out(count);
            for (std::size_t i = 0; i < count; ++i) {
                const auto raw = static_cast<std::int16_t>(detail::read_u16le(bytes, body + 2 * i));
                out[i] = static_cast<double>(raw) / 32768.0;
            }
            sample_rate = static_cast<double>(rate);
            return out;
        }
        pos = body + size + (size & 1u);
    }
    throw ValidationError(have_fmt ? "empty sample payload" : "malformed header: missing fmt chunk");
}

/// csv_sample_rate is the sidecar rate for CSV input; WAV files carry their own.
inline Signal load_signal(const std::filesystem::path& path, SignalFormat format, double csv_sample_rate = 16000.0) {
    const std::string bytes = detail::read_file(path);
    Signal s;
    s.source_id = path.stem().string();
    if (format == SignalFormat::csv) {
        s.samples = parse_csv_samples(bytes);
        s.sample_rate = csv_sample_rate;
    } else {
        s.samples = parse_wav_pcm16_mono(bytes, s.sample_rate);
    }
    if (s.samples.empty()) throw ValidationError("empty sample payload in '" + path.string() + "'");
    s.validate();
    return s;
}

inline Signal load_signal(const std::filesystem::path& path, double csv_sample_rate = 16000.0) {
    return load_signal(path, format_from_path(path), csv_sample_rate);
}

inline std::int16_t to_pcm16(double v) {
    const double scaled = std::round(std::clamp(v, -1.0, 1.0) * 32768.0);
    return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

inline std::string encode_wav_pcm16(const Signal& signal) {
    const auto data_bytes = static_cast<std::uint32_t>(signal.size() * 2);
    const auto rate = static_cast<std::uint32_t>(std::lround(signal.sample_rate));
    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    detail::put_u32le(out, 36 + data_bytes);
    out += "WAVEfmt ";
    detail::put_u32le(out, 16);
    detail::put_u16le(out, 1);         // PCM
    detail::put_u16le(out, 1);         // mono
    detail::put_u32le(out, rate);
    detail::put_u32le(out, rate * 2);  // byte rate
    detail::put_u16le(out, 2);         // block align
    detail::put_u16le(out, 16);
    out += "data";
    detail::put_u32le(out, data_bytes);
    for (double v : signal.samples) detail::put_u16le(out, static_cast<std::uint16_t>(to_pcm16(v)));
    return out;
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error writing '" + path.string() + "'");
}

inline void write_wav_pcm16(const std::filesystem::path& path, const Signal& signal) {
    write_file(path, encode_wav_pcm16(signal));
}

/// One value per line, shortest round-trip representation.
inline void write_csv_signal(const std::filesystem::path& path, const Signal& signal) {
    std::string text;
    std::array<char, 32> buf{};
    for (double v : signal.samples) {
        const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
        text.append(buf.data(), res.ptr);
        text.push_back('\n');
    }
    write_file(path, text);
}

// ----------------------------------------------------------------------------
// Synthetic data
// ----------------------------------------------------------------------------

enum class AnomalyKind { harmonic_burst, broadband_burst, amplitude_step };

inline AnomalyKind parse_anomaly_kind(std::string_view text) {
    if (text == "harmonic_burst") return AnomalyKind::harmonic_burst;
    if (text == "broadband_burst") return AnomalyKind::broadband_burst;
    if (text == "amplitude_step") return AnomalyKind::amplitude_step;
    throw ValidationError("unknown anomaly kind '" + std::string(text) + "'");
}

inline std::string_view to_string(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::harmonic_burst: return "harmonic_burst";
        case AnomalyKind::broadband_burst: return "broadband_burst";
        case AnomalyKind::amplitude_step: return "amplitude_step";
    }
    return "unknown";
}

struct SynthConfig {
    std::size_t n_normal = 0;
    std::size_t n_anomalous = 0;
    std::size_t signal_len = 2048;
    double sample_rate = 16000.0;
    double snr_db = 6.0;
    AnomalyKind anomaly_kind = AnomalyKind::harmonic_burst;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (signal_len == 0) throw ValidationError("signal_len must be positive");
        if (!(sample_rate > 0.0)) throw ValidationError("sample_rate must be positive");
        if (!std::isfinite(snr_db)) throw ValidationError("snr_db must be finite");
    }
};

/// Normalized frequencies (cycles per sample) of the machine tones present in every signal.
inline constexpr std::array<double, 3> kToneFrequencies{0.031, 0.067, 0.113};
inline constexpr std::array<double, 3> kToneAmplitudes{1.0, 0.7, 0.5};

/// Odd harmonics (3rd, 5th, 7th) of the burst fundamental, normalized frequency.
inline constexpr double kBurstFundamental = 0.045;
inline constexpr std::array<double, 3> kBurstHarmonics{3 * kBurstFundamental, 5 * kBurstFundamental,
                                                      7 * kBurstFundamental};
inline constexpr std::array<double, 3> kBurstAmplitudes{0.9, 0.7, 0.5};

namespace detail {

inline double tone_power() {
    double p = 0.0;
    for (double a : kToneAmplitudes) p += 0.5 * a * a;
    return p;
}

inline Signal synth_one(const SynthConfig& cfg, std::size_t index, bool anomalous) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.rng_seed), static_cast<std::uint32_t>(cfg.rng_seed >> 32),
                      static_cast<std::uint32_t>(index), anomalous ? 1u : 0u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> jitter(0.9, 1.1);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const std::size_t n = cfg.signal_len;
    const double noise_std = std::sqrt(tone_power() / std::pow(10.0, cfg.snr_db / 10.0));

    Signal s;
    s.sample_rate = cfg.sample_rate;
    s.label = anomalous ? Label::anomalous : Label::normal;
    std::ostringstream id;
    id << (anomalous ? "anomalous_" : "normal_") << std::setw(4) << std::setfill('0') << index;
    s.source_id = id.str();
    s.samples.assign(n, 0.0);

    for (std::size_t t = 0; t < kToneFrequencies.size(); ++t) {
        const double amp = kToneAmplitudes[t] * jitter(rng);
        const double ph = phase(rng);
        const double w = 2.0 * std::numbers::pi * kToneFrequencies[t];
        for (std::size_t i = 0; i < n; ++i) s.samples[i] += amp * std::sin(w * static_cast<double>(i) + ph);
    }
    for (auto& v : s.samples) v += noise_std * gauss(rng);

    if (anomalous) {
        const std::size_t burst_len = std::max<std::size_t>(1, n / 4);
        std::uniform_int_distribution<std::size_t> start_dist(0, n - burst_len);
        const std::size_t start = start_dist(rng);
        switch (cfg.anomaly_kind) {
            case AnomalyKind::harmonic_burst:
                for (std::size_t h = 0; h < kBurstHarmonics.size(); ++h) {
                    const double ph = phase(rng);
                    const double w = 2.0 * std::numbers::pi * kBurstHarmonics[h];
                    for (std::size_t i = start; i < start + burst_len; ++i)
                        s.samples[i] += kBurstAmplitudes[h] * std::sin(w * static_cast<double>(i) + ph);
                }
                break;
            case AnomalyKind::broadband_burst: {
                const double burst_std = 2.0 * std::sqrt(tone_power());
                for (std::size_t i = start; i < start + burst_len; ++i) s.samples[i] += burst_std * gauss(rng);
                break;
            }
            case AnomalyKind::amplitude_step:
                for (std::size_t i = start; i < n; ++i) s.samples[i] *= 2.5;
                break;
        }
    }

    // Common scale so the loudest synthetic signals stay inside [-1, 1] for PCM16 export.
    const double peak = std::accumulate(kToneAmplitudes.begin(), kToneAmplitudes.end(), 0.0) +
                        std::accumulate(kBurstAmplitudes.begin(), kBurstAmplitudes.end(), 0.0) + 6.0 * noise_std;
    const double scale = 0.25 / std::max(1.0, peak / 4.0);
    for (auto& v : s.samples) v = std::clamp(v * scale, -1.0, 1.0);
    return s;
}

}  // namespace detail

/// Normal signals first (ids normal_0000...), then anomalous (anomalous_0000...).
inline std::vector<Signal> synth_dataset(const SynthConfig& cfg) {
    cfg.validate();
    std::vector<Signal> out;
    out.reserve(cfg.n_normal + cfg.n_anomalous);
    for (std::size_t i = 0; i < cfg.n_normal; ++i) out.push_back(detail::synth_one(cfg, i, false));
    for (std::size_t i = 0; i < cfg.n_anomalous; ++i) out.push_back(detail::synth_one(cfg, i, true));
    return out;
}

}  // namespace grlnet
