#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sgloop/comparator.hpp"
#include "sgloop/encoder.hpp"
#include "sgloop/params.hpp"

namespace sgloop {

// In-memory lookup of cached graphs keyed by (sequence, scan index).
struct GraphStore {
    std::map<std::pair<std::string, int>, SemanticGraph> graphs;

    void put(const std::string& seq, int idx, SemanticGraph g) {
        graphs.insert_or_assign({seq, idx}, std::move(g));
    }

    const SemanticGraph* find(const std::string& seq, int idx) const {
        auto it = graphs.find({seq, idx});
        return it == graphs.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return graphs.size(); }
};

struct PairExample {
    const SemanticGraph* first = nullptr;
    const SemanticGraph* second = nullptr;
    int label = 0;
};

// Encoder + comparison head behind one parameter dictionary.
struct PlaceModel {
    ModelConfig config;
    ParamDict params;

    static PlaceModel init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        return PlaceModel{cfg, init_params(cfg, seed)};
    }

    GraphVector encode_graph(const SemanticGraph& g) const { return encode(g, config, params); }

    double predict_pair(const SemanticGraph& a, const SemanticGraph& b) const {
        ad::Tape t;
        ParamVars pv = register_params(t, params, false);
        enc::EncodeVars e1 = enc::encode_on_tape(t, a, config, pv);
        enc::EncodeVars e2 = enc::encode_on_tape(t, b, config, pv);
        ad::Var p = cmp::predict_on_tape(t, e1.e, e2.e, config, pv);
        return t.value(p)(0, 0);
    }

    double predict_vectors(const Eigen::VectorXd& e1, const Eigen::VectorXd& e2) const {
        return predict(e1, e2, config, params);
    }

    struct BatchResult {
        double loss = 0.0;
        std::vector<double> predictions;
        ParamDict gradients;
    };

    // One tape for the whole batch: every pair shares the same parameter leaves,
    // so backward() accumulates batch gradients in a single pass.
    BatchResult loss_and_gradients(const std::vector<PairExample>& batch) const {
        ad::Tape t;
        ParamVars pv = register_params(t, params, true);
        std::vector<ad::Var> preds;
        std::vector<int> labels;
        preds.reserve(batch.size());
        for (const auto& ex : batch) {
            enc::EncodeVars e1 = enc::encode_on_tape(t, *ex.first, config, pv);
            enc::EncodeVars e2 = enc::encode_on_tape(t, *ex.second, config, pv);
            preds.push_back(cmp::predict_on_tape(t, e1.e, e2.e, config, pv));
            labels.push_back(ex.label);
        }
        ad::Var loss = cmp::bce_on_tape(t, preds, labels);
        t.backward(loss);

        BatchResult out;
        out.loss = t.value(loss)(0, 0);
        for (ad::Var p : preds) out.predictions.push_back(t.value(p)(0, 0));
        for (const auto& [name, var] : pv.vars) out.gradients.emplace(name, t.grad(var));
        return out;
    }
};

}  // namespace sgloop
