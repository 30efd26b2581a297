#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgloop/autodiff.hpp"
#include "sgloop/common.hpp"

namespace sgloop {

// Architecture knobs shared by the encoder and the comparison head. The four
// toggles select the ablation variants; everything else is the full model.
struct ModelConfig {
    int num_classes = 12;
    int max_nodes = 50;
    int embed_dim = 32;  // graph vector length
    int heads = 4;       // attention heads per branch
    int knn = 10;        // neighbors per node
    int sim_dim = 16;    // similarity vector length
    int fc_hidden = 16;
    bool use_diff = true;  // difference terms in the comparison head
    bool use_gat = true;   // attention branches vs mean aggregation
    bool use_geo = true;   // include the bounding-box branch
    bool use_att = true;   // context-vector graph embedding vs mean pooling

    int head_dim() const { return embed_dim / heads; }
    int fused_width() const { return (use_geo ? 3 : 2) * embed_dim; }

    void validate() const {
        if (num_classes <= 0 || max_nodes <= 0 || embed_dim <= 0 || heads <= 0 || knn <= 0 ||
            sim_dim <= 0 || fc_hidden <= 0) {
            throw DataError("ModelConfig requires positive dimensions");
        }
        if (embed_dim % heads != 0) {
            throw DataError("embed_dim must be divisible by the head count");
        }
    }

    nlohmann::json to_json() const {
        return {{"num_classes", num_classes}, {"max_nodes", max_nodes},
                {"embed_dim", embed_dim},     {"heads", heads},
                {"knn", knn},                 {"sim_dim", sim_dim},
                {"fc_hidden", fc_hidden},     {"use_diff", use_diff},
                {"use_gat", use_gat},         {"use_geo", use_geo},
                {"use_att", use_att}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.num_classes = j.value("num_classes", c.num_classes);
        c.max_nodes = j.value("max_nodes", c.max_nodes);
        c.embed_dim = j.value("embed_dim", c.embed_dim);
        c.heads = j.value("heads", c.heads);
        c.knn = j.value("knn", c.knn);
        c.sim_dim = j.value("sim_dim", c.sim_dim);
        c.fc_hidden = j.value("fc_hidden", c.fc_hidden);
        c.use_diff = j.value("use_diff", c.use_diff);
        c.use_gat = j.value("use_gat", c.use_gat);
        c.use_geo = j.value("use_geo", c.use_geo);
        c.use_att = j.value("use_att", c.use_att);
        c.validate();
        return c;
    }
};

// Named parameter arrays. std::map keeps iteration order stable so seeded
// initialization and checkpoints are reproducible.
using ParamDict = std::map<std::string, ad::Mat>;

inline std::vector<std::pair<std::string, std::pair<int, int>>> param_shapes(
    const ModelConfig& cfg) {
    cfg.validate();
    std::vector<std::pair<std::string, std::pair<int, int>>> shapes;
    const int fp = cfg.embed_dim;
    const auto branch = [&](const std::string& name, int feat_dim) {
        if (cfg.use_gat) {
            for (int z = 0; z < cfg.heads; ++z) {
                shapes.push_back({"enc." + name + ".W" + std::to_string(z),
                                  {cfg.head_dim(), 2 * feat_dim}});
                shapes.push_back({"enc." + name + ".a" + std::to_string(z), {cfg.head_dim(), 1}});
            }
        } else {
            shapes.push_back({"enc." + name + ".W", {fp, 2 * feat_dim}});
        }
    };
    branch("sem", cfg.num_classes);
    branch("cen", 3);
    if (cfg.use_geo) branch("geo", 6);

    shapes.push_back({"enc.fuse.Q", {fp, cfg.fused_width()}});
    shapes.push_back({"enc.fuse.K", {fp, cfg.fused_width()}});
    shapes.push_back({"enc.fuse.V", {fp, cfg.fused_width()}});
    if (cfg.use_att) {
        shapes.push_back({"enc.embed.Q", {fp, fp}});
        shapes.push_back({"enc.embed.K", {fp, fp}});
        shapes.push_back({"enc.embed.V", {fp, fp}});
    }

    if (cfg.use_diff) {
        shapes.push_back({"cmp.W1", {cfg.sim_dim * fp, fp}});
        shapes.push_back({"cmp.W2", {cfg.sim_dim, fp}});
    }
    shapes.push_back({"cmp.W3", {cfg.sim_dim, 2 * fp}});
    shapes.push_back({"cmp.b", {cfg.sim_dim, 1}});
    shapes.push_back({"cmp.fc1.W", {cfg.fc_hidden, cfg.sim_dim}});
    shapes.push_back({"cmp.fc1.b", {cfg.fc_hidden, 1}});
    shapes.push_back({"cmp.fc2.W", {1, cfg.fc_hidden}});
    shapes.push_back({"cmp.fc2.b", {1, 1}});
    return shapes;
}

inline std::size_t param_count(const ModelConfig& cfg) {
    std::size_t n = 0;
    for (const auto& [_, shape] : param_shapes(cfg)) {
        n += static_cast<std::size_t>(shape.first) * static_cast<std::size_t>(shape.second);
    }
    return n;
}

// Uniform in +-sqrt(1/fan_in), fan_in = input width of the map.
inline ParamDict init_params(const ModelConfig& cfg, std::uint64_t seed) {
    ParamDict params;
    Rng rng = make_rng(derive_seed(seed, 0x9a11));
    for (const auto& [name, shape] : param_shapes(cfg)) {
        const double bound = std::sqrt(1.0 / static_cast<double>(shape.second));
        std::uniform_real_distribution<double> dist(-bound, bound);
        ad::Mat m(shape.first, shape.second);
        for (int r = 0; r < shape.first; ++r) {
            for (int c = 0; c < shape.second; ++c) m(r, c) = dist(rng);
        }
        params.emplace(name, std::move(m));
    }
    return params;
}

// Tape handles for every named parameter; trainable registers them as leaves
// with gradient storage, otherwise they enter the tape as constants.
struct ParamVars {
    std::map<std::string, ad::Var> vars;

    ad::Var at(const std::string& name) const {
        auto it = vars.find(name);
        if (it == vars.end()) throw DataError("unknown parameter: " + name);
        return it->second;
    }
};

inline ParamVars register_params(ad::Tape& tape, const ParamDict& params, bool trainable) {
    ParamVars pv;
    for (const auto& [name, value] : params) {
        pv.vars.emplace(name, trainable ? tape.param(value) : tape.constant(value));
    }
    return pv;
}

}  // namespace sgloop
