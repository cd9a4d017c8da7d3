#pragma once

#include <algorithm>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "grlnet/metrics.hpp"

namespace grlnet::testing {

using metrics::ScoredSample;

/// Pairwise (anomalous, normal) win rate, ties count one half.
inline double mann_whitney(const std::vector<ScoredSample>& s) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (const auto& a : s) {
        if (a.label != Label::anomalous) continue;
        for (const auto& n : s) {
            if (n.label != Label::normal) continue;
            ++pairs;
            if (a.score > n.score) wins += 1.0;
            else if (a.score == n.score) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

/// Youden J at tau recomputed from raw counts.
inline double youden_j(const std::vector<ScoredSample>& s, double tau) {
    double tp = 0, fp = 0, pos = 0, neg = 0;
    for (const auto& x : s) {
        const bool a = x.label == Label::anomalous;
        (a ? pos : neg) += 1;
        if (x.score >= tau) (a ? tp : fp) += 1;
    }
    return tp / pos - fp / neg;
}

/// Every distinct score tried; smallest maximizer kept.
inline double exhaustive_youden(const std::vector<ScoredSample>& s) {
    std::set<double> cands;
    for (const auto& x : s) cands.insert(x.score);
    double best_j = -std::numeric_limits<double>::infinity(), best = 0.0;
    for (double t : cands) {
        const double j = youden_j(s, t);
        if (j > best_j) {
            best_j = j;
            best = t;
        }
    }
    return best;
}

/// AP from prefixes of the descending distinct-score list.
inline double prefix_average_precision(const std::vector<ScoredSample>& s) {
    std::set<double, std::greater<>> cands;
    double pos = 0;
    for (const auto& x : s) {
        cands.insert(x.score);
        pos += x.label == Label::anomalous;
    }
    double ap = 0.0, prev_r = 0.0;
    for (double t : cands) {
        double tp = 0, n = 0;
        for (const auto& x : s)
            if (x.score >= t) {
                ++n;
                tp += x.label == Label::anomalous;
            }
        const double r = tp / pos;
        ap += (r - prev_r) * (tp / n);
        prev_r = r;
    }
    return ap;
}

/// Random instance with both classes and coarse scores so ties occur.
inline std::vector<ScoredSample> random_instance(std::mt19937_64& rng, std::size_t max_n = 200) {
    std::uniform_int_distribution<std::size_t> size(2, max_n);
    std::uniform_int_distribution<int> level(0, 20);
    std::bernoulli_distribution coin(0.4);
    const std::size_t n = size(rng);
    std::vector<ScoredSample> s(n);
    for (auto& x : s) {
        x.label = coin(rng) ? Label::anomalous : Label::normal;
        x.score = (level(rng) + (x.label == Label::anomalous ? 2 : 0)) / 20.0;
    }
    s[0].label = Label::anomalous;
    s[1].label = Label::normal;
    return s;
}

}  // namespace grlnet::testing
