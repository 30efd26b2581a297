#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sgloop/common.hpp"

namespace sgloop {

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

// Thresholds are the sorted unique scores (descending, so recall is
// non-decreasing along the curve). A sample is predicted positive when its
// score >= threshold. Precision 0/0 is defined as 1.
inline std::vector<PrPoint> pr_curve(const std::vector<double>& scores,
                                     const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw DataError("pr_curve size mismatch");
    if (scores.empty()) throw DataError("pr_curve requires samples");
    long positives = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw DataError("pr_curve labels must be 0/1");
        if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
            throw DataError("pr_curve scores must lie in [0,1]");
        }
        positives += labels[i];
    }
    if (positives == 0 || positives == static_cast<long>(labels.size())) {
        throw DataError("pr_curve requires at least one positive and one negative label");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<PrPoint> curve;
    long tp = 0;
    long fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = scores[order[i]];
        while (i < order.size() && scores[order[i]] == t) {
            if (labels[order[i]] == 1) ++tp; else ++fp;
            ++i;
        }
        PrPoint p;
        p.threshold = t;
        p.precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        p.recall = static_cast<double>(tp) / static_cast<double>(positives);
        curve.push_back(p);
    }
    return curve;
}

inline double f1_of(double precision, double recall) {
    const double denom = precision + recall;
    return denom == 0.0 ? 0.0 : 2.0 * precision * recall / denom;
}

inline double max_f1(const std::vector<PrPoint>& curve) {
    if (curve.empty()) throw DataError("max_f1 over an empty curve");
    double best = 0.0;
    for (const auto& p : curve) best = std::max(best, f1_of(p.precision, p.recall));
    return best;
}

inline double max_f1_threshold(const std::vector<PrPoint>& curve) {
    if (curve.empty()) throw DataError("max_f1_threshold over an empty curve");
    double best = -1.0;
    double threshold = curve.front().threshold;
    for (const auto& p : curve) {
        const double f1 = f1_of(p.precision, p.recall);
        if (f1 > best) {
            best = f1;
            threshold = p.threshold;
        }
    }
    return threshold;
}

// Trapezoidal area over recall, anchored at (recall 0, precision 1) which is the
// empty-prediction limit under the same 0/0 := 1 convention.
inline double auc(const std::vector<PrPoint>& curve) {
    if (curve.empty()) throw DataError("auc over an empty curve");
    double area = 0.0;
    double prev_recall = 0.0;
    double prev_precision = 1.0;
    for (const auto& p : curve) {
        area += (p.recall - prev_recall) * 0.5 * (p.precision + prev_precision);
        prev_recall = p.recall;
        prev_precision = p.precision;
    }
    return area;
}

}  // namespace sgloop
