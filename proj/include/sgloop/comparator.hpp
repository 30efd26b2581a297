#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "sgloop/autodiff.hpp"
#include "sgloop/params.hpp"

namespace sgloop {

inline constexpr double kPredictionClamp = 1e-7;

namespace cmp {

// Similarity vector: s_t = ReLU(d^T W1_t d + W2_t . d + W3_t . [e1; e2] + b_t)
// with d = |e1 - e2|. W1 is stored stacked: rows [t*F', (t+1)*F') hold W1_t.
inline ad::Var similarity_on_tape(ad::Tape& t, ad::Var e1, ad::Var e2, const ModelConfig& cfg,
                                  const ParamVars& pv) {
    ad::Var cat = t.concat_rows(e1, e2);                       // 2F' x 1
    ad::Var pre = t.add(t.matmul(pv.at("cmp.W3"), cat), pv.at("cmp.b"));
    if (cfg.use_diff) {
        ad::Var d = t.abs_(t.sub(e1, e2));                     // F' x 1
        ad::Var w1d = t.reshape_rows(t.matmul(pv.at("cmp.W1"), d), cfg.embed_dim);  // S x F'
        ad::Var second = t.matmul(w1d, d);                     // S x 1
        ad::Var first = t.matmul(pv.at("cmp.W2"), d);          // S x 1
        pre = t.add(pre, t.add(second, first));
    }
    return t.relu(pre);
}

inline ad::Var predict_on_tape(ad::Tape& t, ad::Var e1, ad::Var e2, const ModelConfig& cfg,
                               const ParamVars& pv) {
    ad::Var s = similarity_on_tape(t, e1, e2, cfg, pv);
    ad::Var hidden = t.relu(t.add(t.matmul(pv.at("cmp.fc1.W"), s), pv.at("cmp.fc1.b")));
    return t.sigmoid(t.add(t.matmul(pv.at("cmp.fc2.W"), hidden), pv.at("cmp.fc2.b")));
}

// Mean binary cross entropy over a batch of scalar predictions.
inline ad::Var bce_on_tape(ad::Tape& t, const std::vector<ad::Var>& preds,
                           const std::vector<int>& labels) {
    if (preds.empty()) throw DataError("bce loss over an empty batch");
    ad::Var one = t.constant(ad::Mat::Ones(1, 1));
    ad::Var total{};
    for (std::size_t i = 0; i < preds.size(); ++i) {
        ad::Var p = t.clamp(preds[i], kPredictionClamp, 1.0 - kPredictionClamp);
        ad::Var term = labels[i] == 1 ? t.log_(p) : t.log_(t.sub(one, p));
        total = (i == 0) ? term : t.add(total, term);
    }
    return t.scale(total, -1.0 / static_cast<double>(preds.size()));
}

}  // namespace cmp

// Value-level surfaces.

inline Eigen::VectorXd similarity_vector(const Eigen::VectorXd& e1, const Eigen::VectorXd& e2,
                                         const ModelConfig& cfg, const ParamDict& params) {
    ad::Tape t;
    ParamVars pv = register_params(t, params, false);
    ad::Var s = cmp::similarity_on_tape(t, t.constant(e1), t.constant(e2), cfg, pv);
    return t.value(s).col(0);
}

inline double predict(const Eigen::VectorXd& e1, const Eigen::VectorXd& e2,
                      const ModelConfig& cfg, const ParamDict& params) {
    ad::Tape t;
    ParamVars pv = register_params(t, params, false);
    ad::Var p = cmp::predict_on_tape(t, t.constant(e1), t.constant(e2), cfg, pv);
    return t.value(p)(0, 0);
}

inline double bce_loss(const std::vector<double>& preds, const std::vector<int>& labels) {
    if (preds.empty()) throw DataError("bce loss over an empty batch");
    if (preds.size() != labels.size()) throw DataError("bce loss size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double p = std::clamp(preds[i], kPredictionClamp, 1.0 - kPredictionClamp);
        total += labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return -total / static_cast<double>(preds.size());
}

}  // namespace sgloop
