// ============================================================================
// grlnet/metrics.hpp - confusion counts, precision/recall/F1, ROC-AUC,
// average precision and Youden-index thresholds
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grlnet/errors.hpp"
#include "grlnet/signal_io.hpp"

namespace grlnet::metrics {

struct ScoredSample {
    double score = 0.0;
    Label label = Label::normal;
};

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t total() const { return tp + fp + tn + fn; }
};

struct Prf1 {
    double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct RocPoint {
    double fpr = 0.0, tpr = 0.0, threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

namespace detail {

inline void require_finite(std::span<const ScoredSample> samples) {
    for (const auto& s : samples)
        if (!std::isfinite(s.score)) throw ValidationError("metrics: non-finite score");
}

inline std::pair<std::size_t, std::size_t> class_counts(std::span<const ScoredSample> samples) {
    std::size_t pos = 0;
    for (const auto& s : samples) pos += s.label == Label::anomalous;
    return {pos, samples.size() - pos};
}

inline void require_both_classes(std::span<const ScoredSample> samples, const char* what) {
    const auto [pos, neg] = class_counts(samples);
    if (pos == 0 || neg == 0) throw ValidationError(std::string(what) + ": both classes must be present");
}

/// Indices sorted by descending score.
inline std::vector<std::size_t> descending(std::span<const ScoredSample> samples) {
    std::vector<std::size_t> idx(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return samples[a].score > samples[b].score; });
    return idx;
}

inline double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace detail

/// Positive (anomalous) prediction iff score >= tau.
inline ConfusionCounts confusion(std::span<const ScoredSample> samples, double tau) {
    detail::require_finite(samples);
    ConfusionCounts c;
    for (const auto& s : samples) {
        const bool predicted = s.score >= tau;
        const bool actual = s.label == Label::anomalous;
        if (predicted && actual) ++c.tp;
        else if (predicted) ++c.fp;
        else if (actual) ++c.fn;
        else ++c.tn;
    }
    return c;
}

/// Undefined ratios are reported as 0.
inline Prf1 prf1(const ConfusionCounts& c) {
    Prf1 r;
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
    r.accuracy = detail::ratio(tp + tn, tp + fp + tn + fn);
    r.precision = detail::ratio(tp, tp + fp);
    r.recall = detail::ratio(tp, tp + fn);
    r.f1 = detail::ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
    return r;
}

/// One point per distinct score, from (0,0) at +inf down to (1,1) at -inf.
inline RocCurve roc_auc(std::span<const ScoredSample> samples) {
    detail::require_finite(samples);
    detail::require_both_classes(samples, "roc_auc");
    const auto [pos, neg] = detail::class_counts(samples);
    const auto order = detail::descending(samples);
    constexpr double inf = std::numeric_limits<double>::infinity();

    RocCurve curve;
    curve.points.push_back({0.0, 0.0, inf});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double t = samples[order[i]].score;
        while (i < order.size() && samples[order[i]].score == t) {
            if (samples[order[i]].label == Label::anomalous) ++tp;
            else ++fp;
            ++i;
        }
        curve.points.push_back(
            {static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos), t});
    }
    curve.points.push_back({1.0, 1.0, -inf});
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        curve.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    return curve;
}

/// Step-wise sum of (R_n - R_{n-1}) * P_n over distinct descending thresholds.
inline double average_precision(std::span<const ScoredSample> samples) {
    detail::require_finite(samples);
    const auto [pos, neg] = detail::class_counts(samples);
    if (pos == 0) throw ValidationError("average_precision: no anomalous samples");
    const auto order = detail::descending(samples);
    double ap = 0.0, prev_recall = 0.0;
    std::size_t tp = 0, seen = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double t = samples[order[i]].score;
        while (i < order.size() && samples[order[i]].score == t) {
            tp += samples[order[i]].label == Label::anomalous;
            ++seen;
            ++i;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

/// Smallest distinct score maximizing TPR - FPR.
inline double youden_threshold(std::span<const ScoredSample> samples) {
    detail::require_finite(samples);
    detail::require_both_classes(samples, "youden_threshold");
    const auto [pos, neg] = detail::class_counts(samples);
    const auto order = detail::descending(samples);
    double best_j = -std::numeric_limits<double>::infinity();
    double best_tau = 0.0;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double t = samples[order[i]].score;
        while (i < order.size() && samples[order[i]].score == t) {
            if (samples[order[i]].label == Label::anomalous) ++tp;
            else ++fp;
            ++i;
        }
        const double j = static_cast<double>(tp) / static_cast<double>(pos) -
                         static_cast<double>(fp) / static_cast<double>(neg);
        if (j >= best_j) {  // descending sweep: >= keeps the smallest maximizer
            best_j = j;
            best_tau = t;
        }
    }
    return best_tau;
}

struct Report {
    double auc = 0.0, ap = 0.0, tau = 0.0;
    Prf1 at_tau;
    RocCurve roc;
};

/// Youden tau unless one is supplied.
inline Report evaluate(std::span<const ScoredSample> samples, std::optional<double> tau = std::nullopt) {
    Report r;
    r.roc = roc_auc(samples);
    r.auc = r.roc.auc;
    r.ap = average_precision(samples);
    r.tau = tau ? *tau : youden_threshold(samples);
    r.at_tau = prf1(confusion(samples, r.tau));
    return r;
}

}  // namespace grlnet::metrics
