#pragma once

#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgloop/common.hpp"
#include "sgloop/metrics.hpp"
#include "sgloop/model.hpp"
#include "sgloop/pairs.hpp"
#include "sgloop/perturb.hpp"

namespace sgloop {

struct EvalReport {
    double max_f1_score = 0.0;
    double auc_score = 0.0;
    double best_threshold = 0.5;
    std::vector<PrPoint> curve;
    std::size_t evaluated = 0;
    std::vector<std::string> skipped;  // pairs whose graphs were missing
    std::string perturbation = "none";
    std::vector<double> scores;
    std::vector<int> labels;
};

// Scores every pair with the model; pairs with missing graphs are listed and
// skipped. The query store holds the (possibly perturbed) i-side graphs, the
// reference store the j-side; pass the same store twice for a clean run.
inline EvalReport evaluate(const PlaceModel& model, const std::vector<ScanPair>& pairs,
                           const GraphStore& query_store, const GraphStore& reference_store,
                           const std::string& perturbation = "none") {
    EvalReport report;
    report.perturbation = perturbation;

    // Graph vectors are reused across pairs referencing the same scan.
    std::map<std::pair<std::string, int>, Eigen::VectorXd> query_cache, ref_cache;
    auto vector_of = [&model](const GraphStore& store, auto& cache, const std::string& seq,
                              int idx) -> const Eigen::VectorXd* {
        const auto key = std::make_pair(seq, idx);
        auto it = cache.find(key);
        if (it != cache.end()) return &it->second;
        const SemanticGraph* g = store.find(seq, idx);
        if (!g) return nullptr;
        auto [ins, _] = cache.emplace(key, model.encode_graph(*g).e);
        return &ins->second;
    };

    for (const auto& p : pairs) {
        const Eigen::VectorXd* ei = vector_of(query_store, query_cache, p.seq_id, p.i);
        const Eigen::VectorXd* ej = vector_of(reference_store, ref_cache, p.seq_id, p.j);
        if (!ei || !ej) {
            report.skipped.push_back(p.seq_id + ":" + std::to_string(!ei ? p.i : p.j));
            continue;
        }
        report.scores.push_back(model.predict_vectors(*ei, *ej));
        report.labels.push_back(p.label);
        ++report.evaluated;
    }
    if (report.scores.empty()) throw DataError("no evaluable pairs (all graphs missing?)");

    report.curve = pr_curve(report.scores, report.labels);
    report.max_f1_score = max_f1(report.curve);
    report.auc_score = auc(report.curve);
    report.best_threshold = max_f1_threshold(report.curve);
    return report;
}

inline EvalReport evaluate(const PlaceModel& model, const std::vector<ScanPair>& pairs,
                           const GraphStore& store) {
    return evaluate(model, pairs, store, store, "none");
}

inline nlohmann::json report_to_json(const EvalReport& r, const std::string& config_hash) {
    nlohmann::json j;
    j["version"] = 1;
    j["config_hash"] = config_hash;
    j["max_f1"] = r.max_f1_score;
    j["auc"] = r.auc_score;
    j["best_threshold"] = r.best_threshold;
    j["evaluated"] = r.evaluated;
    j["skipped"] = r.skipped;
    j["perturbation"] = r.perturbation;
    auto curve = nlohmann::json::array();
    for (const auto& p : r.curve) {
        curve.push_back({{"threshold", p.threshold},
                         {"precision", p.precision},
                         {"recall", p.recall}});
    }
    j["curve"] = curve;
    return j;
}

inline void save_report(const EvalReport& r, const std::string& path,
                        const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open report for writing: " + path);
    out << report_to_json(r, config_hash).dump(2) << '\n';
}

}  // namespace sgloop
