// ============================================================================
// grlnet/pipeline.hpp - run configuration, manifests, experiments and the
// synth / train / score / eval / ablate commands behind the CLI
// ============================================================================
#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "grlnet/errors.hpp"
#include "grlnet/metrics.hpp"
#include "grlnet/model.hpp"
#include "grlnet/signal_io.hpp"

namespace grlnet {

namespace fs = std::filesystem;

// ============================================================================
// Formatting helpers (locale independent, LF only)
// ============================================================================

/// Shortest round-trip representation.
inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
    write_file(path, text);
}

// ============================================================================
// Run configuration
// ============================================================================

enum class Aggregate { mean, max };

inline Aggregate parse_aggregate(std::string_view s) {
    if (s == "mean") return Aggregate::mean;
    if (s == "max") return Aggregate::max;
    throw ValidationError("unknown aggregate '" + std::string(s) + "' (expected mean or max)");
}

/// Every tunable of a run, gathered from one INI document.
struct RunConfig {
    SynthConfig synth{.n_normal = 200, .n_anomalous = 30};
    std::optional<std::size_t> n_test_normal;  // held-out normals; defaults to n_anomalous
    SignalFormat signal_format = SignalFormat::wav_pcm16_mono;
    WindowSpec window;
    ModelConfig model;
    TrainConfig train;
    DetectConfig detect;
    Aggregate aggregate = Aggregate::mean;
    std::vector<std::size_t> ablate_window_sizes{128, 256, 512, 1024};
    double csv_sample_rate = 16000.0;

    std::size_t test_normals() const { return n_test_normal.value_or(synth.n_anomalous); }

    /// Model geometry follows the window section.
    ModelConfig model_config() const {
        ModelConfig m = model;
        m.window_size = window.window_size;
        return m;
    }

    void set_seed(std::uint64_t seed) {
        synth.rng_seed = seed;
        model.init_seed = seed;
        train.rng_seed = seed;
    }

    void validate() const {
        synth.validate();
        window.validate();
        model_config().validate();
        train.validate();
        detect.validate();
        if (synth.signal_len < window.window_size)
            throw ValidationError("config: synth.signal_len (" + std::to_string(synth.signal_len) +
                                  ") is shorter than window.window_size (" + std::to_string(window.window_size) + ")");
        if (!(csv_sample_rate > 0.0)) throw ValidationError("config: run.csv_sample_rate must be positive");
        for (auto w : ablate_window_sizes)
            if (w < 2 || w > synth.signal_len)
                throw ValidationError("config: ablate.window_sizes entries must lie in [2, signal_len]");
    }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if constexpr (std::is_floating_point_v<T>) {
        char* end = nullptr;
        value = std::strtod(first, &end);
        if (end != last || text.empty()) throw ValidationError("config: '" + key + "' is not a number: '" + text + "'");
    } else {
        auto res = std::from_chars(first, last, value);
        if (res.ec != std::errc{} || res.ptr != last)
            throw ValidationError("config: '" + key + "' is not a non-negative integer: '" + text + "'");
    }
    return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ValidationError("config: '" + key + "' is not a boolean: '" + text + "'");
}

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& text) {
    std::vector<std::size_t> out;
    for (const auto& tok : split(text, ',')) out.push_back(parse_number<std::size_t>(key, tok));
    return out;
}

}  // namespace detail

/// INI grammar: [section] headers, key = value lines, ';' or '#' comments. Unknown keys are rejected.
inline RunConfig parse_run_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }

    RunConfig c;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    using detail::parse_bool;
    using detail::parse_number;
    using detail::parse_size_list;
    const std::map<std::string, std::map<std::string, Setter>> schema{
        {"synth",
         {{"n_normal", [&](auto& k, auto& v) { c.synth.n_normal = parse_number<std::size_t>(k, v); }},
          {"n_anomalous", [&](auto& k, auto& v) { c.synth.n_anomalous = parse_number<std::size_t>(k, v); }},
          {"n_test_normal", [&](auto& k, auto& v) { c.n_test_normal = parse_number<std::size_t>(k, v); }},
          {"signal_len", [&](auto& k, auto& v) { c.synth.signal_len = parse_number<std::size_t>(k, v); }},
          {"sample_rate", [&](auto& k, auto& v) { c.synth.sample_rate = parse_number<double>(k, v); }},
          {"snr_db", [&](auto& k, auto& v) { c.synth.snr_db = parse_number<double>(k, v); }},
          {"anomaly_kind", [&](auto&, auto& v) { c.synth.anomaly_kind = parse_anomaly_kind(v); }},
          {"rng_seed", [&](auto& k, auto& v) { c.synth.rng_seed = parse_number<std::uint64_t>(k, v); }},
          {"format",
           [&](auto&, auto& v) {
               if (v == "wav") c.signal_format = SignalFormat::wav_pcm16_mono;
               else if (v == "csv") c.signal_format = SignalFormat::csv;
               else throw ValidationError("config: synth.format must be wav or csv");
           }}}},
        {"window",
         {{"window_size", [&](auto& k, auto& v) { c.window.window_size = parse_number<std::size_t>(k, v); }},
          {"step_size", [&](auto& k, auto& v) { c.window.step_size = parse_number<std::size_t>(k, v); }}}},
        {"model",
         {{"repr", [&](auto&, auto& v) { c.model.repr = parse_spectrum_repr(v); }},
          {"filter_trainable", [&](auto& k, auto& v) { c.model.filter_trainable = parse_bool(k, v); }},
          {"orthonormal_spectrum", [&](auto& k, auto& v) { c.model.orthonormal_spectrum = parse_bool(k, v); }},
          {"generator_channels", [&](auto& k, auto& v) { c.model.generator_channels = parse_size_list(k, v); }},
          {"local_kernel", [&](auto& k, auto& v) { c.model.local_kernel = parse_number<std::size_t>(k, v); }},
          {"regional_kernel", [&](auto& k, auto& v) { c.model.regional_kernel = parse_number<std::size_t>(k, v); }},
          {"discriminator_channels",
           [&](auto& k, auto& v) { c.model.discriminator_channels = parse_size_list(k, v); }},
          {"discriminator_kernel",
           [&](auto& k, auto& v) { c.model.discriminator_kernel = parse_number<std::size_t>(k, v); }},
          {"discriminator_batch_norm",
           [&](auto& k, auto& v) { c.model.discriminator_batch_norm = parse_bool(k, v); }},
          {"init_seed", [&](auto& k, auto& v) { c.model.init_seed = parse_number<std::uint64_t>(k, v); }}}},
        {"train",
         {{"alpha", [&](auto& k, auto& v) { c.train.alpha = parse_number<double>(k, v); }},
          {"gamma", [&](auto& k, auto& v) { c.train.gamma = parse_number<double>(k, v); }},
          {"lambda", [&](auto& k, auto& v) { c.train.lambda = parse_number<double>(k, v); }},
          {"sigma", [&](auto& k, auto& v) { c.train.sigma = parse_number<double>(k, v); }},
          {"lr_g", [&](auto& k, auto& v) { c.train.lr_g = parse_number<double>(k, v); }},
          {"lr_d", [&](auto& k, auto& v) { c.train.lr_d = parse_number<double>(k, v); }},
          {"epochs", [&](auto& k, auto& v) { c.train.epochs = parse_number<std::size_t>(k, v); }},
          {"batch_size", [&](auto& k, auto& v) { c.train.batch_size = parse_number<std::size_t>(k, v); }},
          {"rng_seed", [&](auto& k, auto& v) { c.train.rng_seed = parse_number<std::uint64_t>(k, v); }}}},
        {"detect",
         {{"beta", [&](auto& k, auto& v) { c.detect.beta = parse_number<double>(k, v); }},
          {"tau", [&](auto& k, auto& v) { c.detect.tau = parse_number<double>(k, v); }},
          {"aggregate", [&](auto&, auto& v) { c.aggregate = parse_aggregate(v); }}}},
        {"ablate",
         {{"window_sizes", [&](auto& k, auto& v) { c.ablate_window_sizes = parse_size_list(k, v); }}}},
        {"run", {{"csv_sample_rate", [&](auto& k, auto& v) { c.csv_sample_rate = parse_number<double>(k, v); }}}},
    };

    for (const auto& [section, body] : tree) {
        const auto sec = schema.find(section);
        if (sec == schema.end()) {
            if (!body.data().empty()) throw ValidationError("config: key '" + section + "' outside a section");
            throw ValidationError("config: unknown section [" + section + "]");
        }
        for (const auto& [key, node] : body) {
            const auto setter = sec->second.find(key);
            if (setter == sec->second.end()) throw ValidationError("config: unknown key '" + section + "." + key + "'");
            setter->second(section + "." + key, trim(node.data()));
        }
    }
    c.validate();
    return c;
}

inline RunConfig load_run_config(const fs::path& path) { return parse_run_config(detail::read_file(path)); }

// ============================================================================
// Manifest
// ============================================================================

enum class Split { train, test };

inline Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw ValidationError("unknown split '" + std::string(s) + "' (expected train or test)");
}

inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct ManifestEntry {
    std::string path;  // as written; relative paths resolve against the manifest directory
    Label label = Label::normal;
    Split split = Split::train;
};

inline constexpr int kManifestVersion = 1;

/// "# format_version=1", then the header "path,label,split", then one row per file.
struct Manifest {
    int format_version = kManifestVersion;
    std::vector<ManifestEntry> entries;
    fs::path base_dir;

    fs::path resolve(const ManifestEntry& e) const {
        const fs::path p(e.path);
        return p.is_absolute() ? p : base_dir / p;
    }

    static std::string source_id(const ManifestEntry& e) { return fs::path(e.path).stem().string(); }

    /// One-class training: every train entry must be normal.
    void require_one_class() const {
        for (const auto& e : entries)
            if (e.split == Split::train && e.label != Label::normal)
                throw ValidationError("manifest: anomalous entry '" + e.path +
                                      "' in the train split (one-class training requires normal data only)");
    }
};

inline std::string serialize_manifest(const Manifest& m) {
    std::string out = "# format_version=" + std::to_string(m.format_version) + "\npath,label,split\n";
    for (const auto& e : m.entries) {
        if (e.path.find_first_of(",\n") != std::string::npos)
            throw ValidationError("manifest: path contains a separator: '" + e.path + "'");
        out += e.path + "," + std::string(to_string(e.label)) + "," + std::string(to_string(e.split)) + "\n";
    }
    return out;
}

inline Manifest parse_manifest(const std::string& text, const fs::path& base_dir = {}) {
    Manifest m;
    m.base_dir = base_dir;
    std::istringstream in(text);
    std::string line;
    bool header = false;
    std::size_t lineno = 0;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find("format_version=");
            if (eq != std::string::npos) {
                m.format_version = detail::parse_number<int>("format_version", trim(line.substr(eq + 15)));
                if (m.format_version != kManifestVersion)
                    throw ValidationError("manifest: unsupported format_version " + std::to_string(m.format_version));
            }
            continue;
        }
        if (!header) {
            if (line != "path,label,split")
                throw ValidationError("manifest: expected header 'path,label,split', got '" + line + "'");
            header = true;
            continue;
        }
        const auto cols = split(line, ',');
        if (cols.size() != 3 || cols[0].empty())
            throw ValidationError("manifest line " + std::to_string(lineno) + ": expected path,label,split");
        ManifestEntry e{cols[0], parse_label(cols[1]), parse_split(cols[2])};
        if (!ids.insert(Manifest::source_id(e)).second)
            throw ValidationError("manifest: duplicate source id '" + Manifest::source_id(e) + "'");
        m.entries.push_back(std::move(e));
    }
    if (!header) throw ValidationError("manifest: missing header 'path,label,split'");
    return m;
}

inline Manifest load_manifest(const fs::path& path) {
    return parse_manifest(detail::read_file(path), path.parent_path());
}

inline Signal load_entry(const Manifest& m, const ManifestEntry& e, double csv_sample_rate) {
    Signal s = load_signal(m.resolve(e), csv_sample_rate);
    s.label = e.label;
    s.source_id = Manifest::source_id(e);
    return s;
}

// ============================================================================
// Experiments (in memory)
// ============================================================================

struct ExperimentData {
    std::vector<Signal> train;  // normal only
    std::vector<Signal> test;   // held-out normals, then anomalies
};

/// Train normals use indices [0, n_normal), held-out normals continue the index sequence.
inline ExperimentData synth_experiment(const RunConfig& cfg) {
    if (cfg.synth.n_normal == 0) throw ValidationError("one-class training requires normal data");
    SynthConfig sc = cfg.synth;
    sc.n_normal = cfg.synth.n_normal + cfg.test_normals();
    auto all = synth_dataset(sc);
    ExperimentData d;
    const auto split_at = all.begin() + static_cast<std::ptrdiff_t>(cfg.synth.n_normal);
    d.train.assign(all.begin(), split_at);
    d.test.assign(split_at, all.end());
    return d;
}

struct SignalScores {
    std::string source_id;
    std::optional<Label> label;
    std::vector<ScoreComponents> windows;
};

inline double aggregate_scores(std::span<const double> scores, Aggregate how) {
    if (scores.empty()) throw ValidationError("aggregate: signal has no windows");
    if (how == Aggregate::max) return *std::max_element(scores.begin(), scores.end());
    return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

inline double signal_score(const SignalScores& s, DetectionStrategy strategy, double beta, Aggregate how) {
    std::vector<double> v;
    v.reserve(s.windows.size());
    for (const auto& c : s.windows) v.push_back(strategy_score(c, strategy, beta));
    return aggregate_scores(v, how);
}

inline std::vector<SignalScores> score_signals(GrlnetModel& model, std::span<const Signal> signals,
                                               const WindowSpec& spec) {
    std::vector<SignalScores> out;
    out.reserve(signals.size());
    for (const auto& s : signals) {
        const auto w = sliding_window(s, spec);
        out.push_back({s.source_id, s.label, score_components(model, w.windows)});
    }
    return out;
}

/// Per-signal labeled scores for one strategy.
inline std::vector<metrics::ScoredSample> labeled_scores(std::span<const SignalScores> scores,
                                                          DetectionStrategy strategy, double beta, Aggregate how) {
    std::vector<metrics::ScoredSample> out;
    for (const auto& s : scores) {
        if (!s.label) throw ValidationError("evaluation: signal '" + s.source_id + "' has no label");
        out.push_back({signal_score(s, strategy, beta, how), *s.label});
    }
    return out;
}

struct ExperimentResult {
    GrlnetModel model;
    std::vector<EpochLoss> trace;
    std::vector<SignalScores> test_scores;
};

inline ExperimentResult run_experiment(const RunConfig& cfg, const ExperimentData& data,
                                       const EpochCallback& on_epoch = {}) {
    cfg.validate();
    ExperimentResult r{GrlnetModel(cfg.model_config()), {}, {}};
    const auto train_windows = sliding_window(std::span<const Signal>(data.train), cfg.window);
    r.trace = train(r.model, train_windows, cfg.train, on_epoch);
    r.test_scores = score_signals(r.model, data.test, cfg.window);
    return r;
}

// ============================================================================
// Commands
// ============================================================================

inline std::string loss_trace_csv(std::span<const EpochLoss> trace) {
    std::string out = "epoch,d_loss,g_loss_recon,g_loss_adv,composite\n";
    for (const auto& e : trace)
        out += std::to_string(e.epoch) + "," + format_double(e.d_loss) + "," + format_double(e.g_loss_recon) + "," +
               format_double(e.g_loss_adv) + "," + format_double(e.composite) + "\n";
    return out;
}

inline std::string checkpoint_name(std::size_t epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%04zu.ckpt", epoch);
    return buf;
}

/// Writes signals/<id>.<ext> and manifest.csv under out_dir; returns the manifest.
inline Manifest cmd_synth(const RunConfig& cfg, const fs::path& out_dir) {
    cfg.validate();
    const auto data = synth_experiment(cfg);
    Manifest m;
    m.base_dir = out_dir;
    const std::string ext = cfg.signal_format == SignalFormat::csv ? ".csv" : ".wav";
    auto emit = [&](const Signal& s, Split split) {
        const std::string rel = "signals/" + s.source_id + ext;
        const fs::path path = out_dir / rel;
        if (path.has_parent_path()) {
            std::error_code ec;
            fs::create_directories(path.parent_path(), ec);
            if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
        }
        if (cfg.signal_format == SignalFormat::csv) write_csv_signal(path, s);
        else write_wav_pcm16(path, s);
        m.entries.push_back({rel, *s.label, split});
    };
    for (const auto& s : data.train) emit(s, Split::train);
    for (const auto& s : data.test) emit(s, Split::test);
    write_text(out_dir / "manifest.csv", serialize_manifest(m));
    return m;
}

/// Trains on the train split; writes checkpoints/epoch_NNNN.ckpt and loss.csv under out_dir.
inline std::vector<EpochLoss> cmd_train(const RunConfig& cfg, const Manifest& manifest, const fs::path& out_dir) {
    cfg.validate();
    manifest.require_one_class();
    std::vector<Signal> signals;
    for (const auto& e : manifest.entries)
        if (e.split == Split::train) signals.push_back(load_entry(manifest, e, cfg.csv_sample_rate));
    if (signals.empty()) throw ValidationError("train: manifest has no train entries");
    for (const auto& s : signals)
        if (s.size() < cfg.window.window_size)
            throw ValidationError("train: signal '" + s.source_id + "' is shorter than the window size");

    GrlnetModel model(cfg.model_config());
    const auto windows = sliding_window(std::span<const Signal>(signals), cfg.window);
    const fs::path ckpt_dir = out_dir / "checkpoints";
    std::error_code ec;
    fs::create_directories(ckpt_dir, ec);
    if (ec) throw IoError("cannot create directory '" + ckpt_dir.string() + "': " + ec.message());
    auto trace = train(model, windows, cfg.train, [&](const EpochLoss& e, GrlnetModel& m) {
        nn::save_checkpoint(ckpt_dir / checkpoint_name(e.epoch), make_checkpoint(m, e.epoch));
    });
    write_text(out_dir / "loss.csv", loss_trace_csv(trace));
    return trace;
}

struct ScoreTables {
    std::string windows_csv;  // source_id,window_index,score
    std::string signals_csv;  // source_id,n_windows,score
};

inline ScoreTables score_tables(std::span<const SignalScores> scores, double beta, Aggregate how) {
    ScoreTables t{"source_id,window_index,score\n", "source_id,n_windows,score\n"};
    for (const auto& s : scores) {
        std::vector<double> v;
        for (std::size_t i = 0; i < s.windows.size(); ++i) {
            v.push_back(anomaly_score(s.windows[i], beta));
            t.windows_csv += s.source_id + "," + std::to_string(i) + "," + format_double(v.back()) + "\n";
        }
        t.signals_csv += s.source_id + "," + std::to_string(v.size()) + "," + format_double(aggregate_scores(v, how)) + "\n";
    }
    return t;
}

/// Scores every manifest entry (optionally one split); writes scores.csv and signal_scores.csv.
inline ScoreTables cmd_score(const fs::path& checkpoint, const Manifest& manifest, double beta, Aggregate how,
                             std::optional<Split> only, double csv_sample_rate, const fs::path& out_dir) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("score: beta must lie in [0,1]");
    if (!fs::exists(checkpoint)) throw IoError("checkpoint '" + checkpoint.string() + "' not found");
    GrlnetModel model = model_from_checkpoint(nn::load_checkpoint(checkpoint));
    WindowSpec spec{model.config.window_size, model.config.window_size};
    std::vector<Signal> signals;
    for (const auto& e : manifest.entries)
        if (!only || e.split == *only) signals.push_back(load_entry(manifest, e, csv_sample_rate));
    for (const auto& s : signals)
        if (s.size() < spec.window_size)
            throw ValidationError("score: signal '" + s.source_id + "' is shorter than the checkpoint window size " +
                                  std::to_string(spec.window_size));
    const auto scores = score_signals(model, signals, spec);
    auto tables = score_tables(scores, beta, how);
    write_text(out_dir / "scores.csv", tables.windows_csv);
    write_text(out_dir / "signal_scores.csv", tables.signals_csv);
    return tables;
}

inline std::string metrics_csv(const metrics::Report& r) {
    return "metric,value\nauc," + format_double(r.auc) + "\nap," + format_double(r.ap) + "\ntau," +
           format_double(r.tau) + "\naccuracy," + format_double(r.at_tau.accuracy) + "\nprecision," +
           format_double(r.at_tau.precision) + "\nrecall," + format_double(r.at_tau.recall) + "\nf1," +
           format_double(r.at_tau.f1) + "\n";
}

inline std::string roc_csv(const metrics::RocCurve& roc) {
    std::string out = "fpr,tpr,threshold\n";
    for (const auto& p : roc.points)
        out += format_double(p.fpr) + "," + format_double(p.tpr) + "," + format_double(p.threshold) + "\n";
    return out;
}

/// Reads either scores.csv or signal_scores.csv (score is the last column) and joins labels by source id.
inline std::vector<metrics::ScoredSample> join_scores(const std::string& scores_text, const Manifest& manifest) {
    std::map<std::string, Label> labels;
    for (const auto& e : manifest.entries) labels[Manifest::source_id(e)] = e.label;
    std::istringstream in(scores_text);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("eval: empty scores file");
    const auto header = split(trim(line), ',');
    if (header.empty() || header.front() != "source_id" || header.back() != "score")
        throw ValidationError("eval: scores header must start with source_id and end with score");
    std::vector<metrics::ScoredSample> out;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const auto cols = split(line, ',');
        if (cols.size() != header.size()) throw ValidationError("eval: malformed scores row '" + line + "'");
        const auto it = labels.find(cols.front());
        if (it == labels.end()) throw ValidationError("eval: unknown source_id '" + cols.front() + "'");
        out.push_back({detail::parse_number<double>("score", cols.back()), it->second});
    }
    return out;
}

/// Writes metrics.csv and roc.csv; tau is the Youden threshold unless supplied.
inline metrics::Report cmd_eval(const fs::path& scores_path, const Manifest& manifest, std::optional<double> tau,
                                const fs::path& out_dir) {
    const auto samples = join_scores(detail::read_file(scores_path), manifest);
    const auto report = metrics::evaluate(samples, tau);
    write_text(out_dir / "metrics.csv", metrics_csv(report));
    write_text(out_dir / "roc.csv", roc_csv(report.roc));
    return report;
}

enum class AblationMode { strategy, beta_sweep, window_sweep, downsample, noise_sweep };

inline AblationMode parse_ablation_mode(std::string_view s) {
    if (s == "strategy") return AblationMode::strategy;
    if (s == "beta_sweep") return AblationMode::beta_sweep;
    if (s == "window_sweep") return AblationMode::window_sweep;
    if (s == "downsample") return AblationMode::downsample;
    if (s == "noise_sweep") return AblationMode::noise_sweep;
    throw ValidationError("unknown ablation mode '" + std::string(s) +
                          "' (expected strategy, beta_sweep, window_sweep, downsample or noise_sweep)");
}

inline constexpr std::array<double, 5> kBetaSweep{0.0, 0.25, 0.5, 0.75, 1.0};
inline constexpr std::array<std::size_t, 6> kDownsampleFactors{1, 2, 4, 6, 8, 32};
inline constexpr std::array<double, 7> kNoiseSweepDb{-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0};

namespace detail {

inline std::string ablation_row(const std::string& key, const std::vector<SignalScores>& scores,
                                DetectionStrategy strategy, double beta, Aggregate how) {
    const auto samples = labeled_scores(scores, strategy, beta, how);
    const auto r = metrics::evaluate(samples);
    return key + "," + format_double(r.auc) + "," + format_double(r.at_tau.f1) + "\n";
}

inline std::string quote(std::string_view s) { return "\"" + std::string(s) + "\""; }

}  // namespace detail

/// Runs one protocol on synthetic data from cfg; returns (and writes) ablation_<mode>.csv.
inline std::string cmd_ablate(const RunConfig& cfg, AblationMode mode, const fs::path& out_dir) {
    cfg.validate();
    const double beta = cfg.detect.beta;
    std::string csv;
    std::string name;
    switch (mode) {
        case AblationMode::strategy: {
            name = "strategy";
            csv = "strategy,auc,f1\n";
            const auto r = run_experiment(cfg, synth_experiment(cfg));
            for (auto s : kAllStrategies)
                csv += detail::ablation_row(detail::quote(to_string(s)), r.test_scores, s, beta, cfg.aggregate);
            break;
        }
        case AblationMode::beta_sweep: {
            name = "beta_sweep";
            csv = "beta,auc,f1\n";
            const auto r = run_experiment(cfg, synth_experiment(cfg));
            for (double b : kBetaSweep)
                csv += detail::ablation_row(format_double(b), r.test_scores, DetectionStrategy::combined, b,
                                            cfg.aggregate);
            break;
        }
        case AblationMode::window_sweep: {
            name = "window_sweep";
            csv = "window_size,auc,f1\n";
            const auto data = synth_experiment(cfg);
            for (auto w : cfg.ablate_window_sizes) {
                RunConfig c = cfg;
                c.window = {w, w};
                const auto r = run_experiment(c, data);
                csv += detail::ablation_row(std::to_string(w), r.test_scores, DetectionStrategy::combined, beta,
                                            cfg.aggregate);
            }
            break;
        }
        case AblationMode::downsample: {
            name = "downsample";
            csv = "factor,window_size,auc,f1\n";
            const auto data = synth_experiment(cfg);
            for (auto f : kDownsampleFactors) {
                RunConfig c = cfg;
                const std::size_t w = std::max<std::size_t>(8, cfg.window.window_size / f);
                c.window = {w, w};
                ExperimentData d;
                for (const auto& s : data.train) d.train.push_back(decimate(s, f));
                for (const auto& s : data.test) d.test.push_back(decimate(s, f));
                c.synth.signal_len = d.train.front().size();
                if (c.synth.signal_len < w)
                    throw ValidationError("ablate: signal too short for downsampling factor " + std::to_string(f));
                const auto r = run_experiment(c, d);
                csv += std::to_string(f) + "," + detail::ablation_row(std::to_string(w), r.test_scores,
                                                                      DetectionStrategy::combined, beta, cfg.aggregate);
            }
            break;
        }
        case AblationMode::noise_sweep: {
            name = "noise_sweep";
            csv = "snr_db,auc,f1\n";
            for (double db : kNoiseSweepDb) {
                RunConfig c = cfg;
                c.synth.snr_db = db;
                const auto r = run_experiment(c, synth_experiment(c));
                csv += detail::ablation_row(format_double(db), r.test_scores, DetectionStrategy::combined, beta,
                                            cfg.aggregate);
            }
            break;
        }
    }
    write_text(out_dir / ("ablation_" + name + ".csv"), csv);
    return csv;
}

}  // namespace grlnet
