#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "sgloop/autodiff.hpp"
#include "sgloop/params.hpp"
#include "sgloop/semantic_graph.hpp"

namespace sgloop {

// --------------------------------------------------------------------------
// kNN neighborhoods

// Per valid node: the k nearest valid nodes by centroid distance, self excluded,
// ties broken by lower index. Fewer than k valid others pads by repeating the
// nearest; a lone valid node gets an empty list (its feature falls back to a
// transformed self). Pseudo-nodes get no neighbors.
inline std::vector<std::vector<int>> knn_indices(const Eigen::MatrixXd& cen,
                                                 const std::vector<std::uint8_t>& mask, int k) {
    const int n = static_cast<int>(mask.size());
    std::vector<int> valid;
    for (int i = 0; i < n; ++i) {
        if (mask[static_cast<std::size_t>(i)]) valid.push_back(i);
    }
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
    if (valid.size() <= 1) return out;

    for (int i : valid) {
        std::vector<std::pair<double, int>> dist;
        dist.reserve(valid.size() - 1);
        for (int j : valid) {
            if (j == i) continue;
            dist.emplace_back((cen.row(i) - cen.row(j)).norm(), j);
        }
        std::sort(dist.begin(), dist.end());
        auto& list = out[static_cast<std::size_t>(i)];
        const int take = std::min<int>(k, static_cast<int>(dist.size()));
        for (int r = 0; r < take; ++r) list.push_back(dist[static_cast<std::size_t>(r)].second);
        while (static_cast<int>(list.size()) < k) list.push_back(dist[0].second);
    }
    return out;
}

namespace enc {

// Valid rows of the three branches, in slot order.
struct CompactGraph {
    Eigen::MatrixXd sem, cen, geo;
    std::vector<int> slots;
    int n = 0;
};

inline CompactGraph compact(const SemanticGraph& g) {
    CompactGraph c;
    c.slots = g.valid_slots();
    c.n = static_cast<int>(c.slots.size());
    c.sem.resize(c.n, g.sem.cols());
    c.cen.resize(c.n, 3);
    c.geo.resize(c.n, 6);
    for (int r = 0; r < c.n; ++r) {
        c.sem.row(r) = g.sem.row(c.slots[static_cast<std::size_t>(r)]);
        c.cen.row(r) = g.cen.row(c.slots[static_cast<std::size_t>(r)]);
        c.geo.row(r) = g.bbox.row(c.slots[static_cast<std::size_t>(r)]);
    }
    return c;
}

// Fixed-width neighbor table over compact indices: always k entries per node.
// A lone node points at itself (difference term vanishes, softmax is uniform).
inline std::vector<int> flat_neighbors(const Eigen::MatrixXd& cen, int k) {
    const int n = static_cast<int>(cen.rows());
    std::vector<int> flat;
    flat.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
    if (n == 1) {
        flat.assign(static_cast<std::size_t>(k), 0);
        return flat;
    }
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> dist;
        dist.reserve(static_cast<std::size_t>(n - 1));
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            dist.emplace_back((cen.row(i) - cen.row(j)).norm(), j);
        }
        std::sort(dist.begin(), dist.end());
        const int take = std::min<int>(k, static_cast<int>(dist.size()));
        for (int r = 0; r < take; ++r) flat.push_back(dist[static_cast<std::size_t>(r)].second);
        for (int r = take; r < k; ++r) flat.push_back(dist[0].second);
    }
    return flat;
}

struct BranchOut {
    ad::Var features;            // n x F'
    std::vector<ad::Var> alpha;  // per head, n x k (empty for mean aggregation)
};

// Multi-head GAT step: logits = LeakyReLU(a_z . W_z [h_i || (h_i - h_j)]),
// softmax over the k neighbors, heads aggregated with ELU and concatenated.
inline BranchOut gat_branch_compact(ad::Tape& t, ad::Var h, const std::vector<int>& nbr_flat,
                                    int k, const ModelConfig& cfg, const ParamVars& pv,
                                    const std::string& branch) {
    const int n = static_cast<int>(t.value(h).rows());
    std::vector<int> center_flat;
    center_flat.reserve(nbr_flat.size());
    for (int i = 0; i < n; ++i) {
        for (int r = 0; r < k; ++r) center_flat.push_back(i);
    }
    ad::Var hc = t.gather_rows(h, center_flat);
    ad::Var hn = t.gather_rows(h, nbr_flat);
    ad::Var edge = t.concat_cols(hc, t.sub(hc, hn));  // (n*k) x 2F

    BranchOut out;
    if (!cfg.use_gat) {
        ad::Var proj = t.matmul(edge, pv.at("enc." + branch + ".W"), false, true);
        ad::Var uniform = t.constant(ad::Mat::Constant(n, k, 1.0 / k));
        out.features = t.elu(t.segment_weighted_sum(uniform, proj, k));
        return out;
    }

    ad::Var head_cat{};
    for (int z = 0; z < cfg.heads; ++z) {
        ad::Var w = pv.at("enc." + branch + ".W" + std::to_string(z));
        ad::Var a = pv.at("enc." + branch + ".a" + std::to_string(z));
        ad::Var proj = t.matmul(edge, w, false, true);            // (n*k) x F'/Z
        ad::Var logits = t.matmul(proj, a);                       // (n*k) x 1
        ad::Var alpha = t.softmax_rows(
            t.reshape_rows(t.leaky_relu(logits, 0.2), k));        // n x k
        out.alpha.push_back(alpha);
        ad::Var agg = t.elu(t.segment_weighted_sum(alpha, proj, k));
        head_cat = (z == 0) ? agg : t.concat_cols(head_cat, agg);
    }
    out.features = head_cat;
    return out;
}

struct AttentionOut {
    ad::Var features;   // n x out_dim
    ad::Var attention;  // n x n
};

// Scaled dot-product self-attention, V carries the width reduction.
inline AttentionOut self_attention(ad::Tape& t, ad::Var x, ad::Var q, ad::Var k_map, ad::Var v) {
    const double d_k = static_cast<double>(t.value(q).rows());
    ad::Var xq = t.matmul(x, q, false, true);
    ad::Var xk = t.matmul(x, k_map, false, true);
    ad::Var scores = t.scale(t.matmul(xq, xk, false, true), 1.0 / std::sqrt(d_k));
    ad::Var attn = t.softmax_rows(scores);
    return {t.matmul(attn, t.matmul(x, v, false, true)), attn};
}

struct EncodeVars {
    ad::Var e;  // F' x 1
    bool empty_scene = false;
    std::vector<BranchOut> branches;
    ad::Var fuse_attention{};
    ad::Var node_embedding{};  // n x F'
};

// Full encoder on an existing tape. Pseudo-nodes are excluded up front, which is
// what makes masked slots provably inert: their attributes never enter the tape.
inline EncodeVars encode_on_tape(ad::Tape& t, const SemanticGraph& g, const ModelConfig& cfg,
                                 const ParamVars& pv) {
    EncodeVars out;
    const CompactGraph c = compact(g);
    if (c.n == 0) {
        out.e = t.constant(ad::Mat::Zero(cfg.embed_dim, 1));
        out.empty_scene = true;
        return out;
    }
    const std::vector<int> nbr = flat_neighbors(c.cen, cfg.knn);

    ad::Var h_sem = t.constant(c.sem);
    ad::Var h_cen = t.constant(c.cen);
    out.branches.push_back(gat_branch_compact(t, h_sem, nbr, cfg.knn, cfg, pv, "sem"));
    out.branches.push_back(gat_branch_compact(t, h_cen, nbr, cfg.knn, cfg, pv, "cen"));
    ad::Var x = t.concat_cols(out.branches[0].features, out.branches[1].features);
    if (cfg.use_geo) {
        ad::Var h_geo = t.constant(c.geo);
        out.branches.push_back(gat_branch_compact(t, h_geo, nbr, cfg.knn, cfg, pv, "geo"));
        x = t.concat_cols(x, out.branches[2].features);
    }

    AttentionOut fused =
        self_attention(t, x, pv.at("enc.fuse.Q"), pv.at("enc.fuse.K"), pv.at("enc.fuse.V"));
    out.fuse_attention = fused.attention;
    out.node_embedding = fused.features;  // n x F'

    if (cfg.use_att) {
        AttentionOut aux = self_attention(t, fused.features, pv.at("enc.embed.Q"),
                                          pv.at("enc.embed.K"), pv.at("enc.embed.V"));
        ad::Var context = t.transpose(t.tanh_(t.mean_rows(aux.features)));  // F' x 1
        ad::Var weights = t.sigmoid(t.matmul(fused.features, context));     // n x 1
        out.e = t.matmul(fused.features, weights, true, false);             // F' x 1
    } else {
        out.e = t.transpose(t.mean_rows(fused.features));
    }
    return out;
}

}  // namespace enc

// --------------------------------------------------------------------------
// Slot-level operation surfaces. These run the tape path on the valid rows and
// scatter results back, so masked slots are exactly zero in every output.

struct GatBranchResult {
    Eigen::MatrixXd features;            // N x F', zero rows for pseudo-nodes
    std::vector<Eigen::MatrixXd> alpha;  // per head, rows follow valid-slot order
};

inline GatBranchResult gat_branch(const Eigen::MatrixXd& h,
                                  const std::vector<std::vector<int>>& neighbors,
                                  const std::vector<std::uint8_t>& mask, const ModelConfig& cfg,
                                  const ParamDict& params, const std::string& branch) {
    const int n_slots = static_cast<int>(h.rows());
    GatBranchResult res;
    res.features = Eigen::MatrixXd::Zero(n_slots, cfg.embed_dim);

    std::vector<int> slots;
    std::vector<int> compact_of(static_cast<std::size_t>(n_slots), -1);
    for (int i = 0; i < n_slots; ++i) {
        if (mask[static_cast<std::size_t>(i)]) {
            compact_of[static_cast<std::size_t>(i)] = static_cast<int>(slots.size());
            slots.push_back(i);
        }
    }
    if (slots.empty()) return res;

    Eigen::MatrixXd hc(static_cast<Eigen::Index>(slots.size()), h.cols());
    for (std::size_t r = 0; r < slots.size(); ++r) {
        hc.row(static_cast<Eigen::Index>(r)) = h.row(slots[r]);
    }
    std::vector<int> flat;
    for (int slot : slots) {
        const auto& list = neighbors[static_cast<std::size_t>(slot)];
        if (list.empty()) {  // isolated node attends to itself
            flat.insert(flat.end(), static_cast<std::size_t>(cfg.knn),
                        compact_of[static_cast<std::size_t>(slot)]);
        } else {
            for (int nb : list) flat.push_back(compact_of[static_cast<std::size_t>(nb)]);
        }
    }

    ad::Tape t;
    ParamVars pv = register_params(t, params, false);
    ad::Var hv = t.constant(hc);
    enc::BranchOut b = enc::gat_branch_compact(t, hv, flat, cfg.knn, cfg, pv, branch);
    for (std::size_t r = 0; r < slots.size(); ++r) {
        res.features.row(slots[r]) = t.value(b.features).row(static_cast<Eigen::Index>(r));
    }
    for (ad::Var a : b.alpha) res.alpha.push_back(t.value(a));
    return res;
}

struct FuseResult {
    Eigen::MatrixXd fused;      // N x F', masked rows exactly zero
    Eigen::MatrixXd attention;  // n_valid x n_valid
};

inline FuseResult fuse_branches(const std::vector<Eigen::MatrixXd>& branch_features,
                                const std::vector<std::uint8_t>& mask, const ModelConfig& cfg,
                                const ParamDict& params) {
    const int n_slots = static_cast<int>(branch_features.front().rows());
    FuseResult res;
    res.fused = Eigen::MatrixXd::Zero(n_slots, cfg.embed_dim);
    std::vector<int> slots;
    for (int i = 0; i < n_slots; ++i) {
        if (mask[static_cast<std::size_t>(i)]) slots.push_back(i);
    }
    if (slots.empty()) return res;

    Eigen::MatrixXd x(static_cast<Eigen::Index>(slots.size()),
                      cfg.embed_dim * static_cast<Eigen::Index>(branch_features.size()));
    for (std::size_t r = 0; r < slots.size(); ++r) {
        for (std::size_t b = 0; b < branch_features.size(); ++b) {
            x.block(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(b) * cfg.embed_dim, 1,
                    cfg.embed_dim) = branch_features[b].row(slots[r]);
        }
    }
    ad::Tape t;
    ParamVars pv = register_params(t, params, false);
    enc::AttentionOut a = enc::self_attention(t, t.constant(x), pv.at("enc.fuse.Q"),
                                              pv.at("enc.fuse.K"), pv.at("enc.fuse.V"));
    for (std::size_t r = 0; r < slots.size(); ++r) {
        res.fused.row(slots[r]) = t.value(a.features).row(static_cast<Eigen::Index>(r));
    }
    res.attention = t.value(a.attention);
    return res;
}

struct GraphVector {
    Eigen::VectorXd e;
    bool empty_scene = false;
};

inline GraphVector graph_embed(const Eigen::MatrixXd& f, const std::vector<std::uint8_t>& mask,
                               const ModelConfig& cfg, const ParamDict& params) {
    GraphVector out;
    out.e = Eigen::VectorXd::Zero(cfg.embed_dim);
    std::vector<int> slots;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) slots.push_back(static_cast<int>(i));
    }
    if (slots.empty()) {
        out.empty_scene = true;
        return out;
    }
    Eigen::MatrixXd fc(static_cast<Eigen::Index>(slots.size()), f.cols());
    for (std::size_t r = 0; r < slots.size(); ++r) {
        fc.row(static_cast<Eigen::Index>(r)) = f.row(slots[r]);
    }
    ad::Tape t;
    ParamVars pv = register_params(t, params, false);
    ad::Var fv = t.constant(fc);
    ad::Var e;
    if (cfg.use_att) {
        enc::AttentionOut aux = enc::self_attention(t, fv, pv.at("enc.embed.Q"),
                                                    pv.at("enc.embed.K"), pv.at("enc.embed.V"));
        ad::Var context = t.transpose(t.tanh_(t.mean_rows(aux.features)));
        ad::Var weights = t.sigmoid(t.matmul(fv, context));
        e = t.matmul(fv, weights, true, false);
    } else {
        e = t.transpose(t.mean_rows(fv));
    }
    out.e = t.value(e).col(0);
    return out;
}

inline GraphVector encode(const SemanticGraph& g, const ModelConfig& cfg,
                          const ParamDict& params) {
    ad::Tape t;
    ParamVars pv = register_params(t, params, false);
    enc::EncodeVars ev = enc::encode_on_tape(t, g, cfg, pv);
    GraphVector out;
    out.empty_scene = ev.empty_scene;
    if (ev.empty_scene) {
        out.e = Eigen::VectorXd::Zero(cfg.embed_dim);
    } else {
        out.e = t.value(ev.e).col(0);
    }
    return out;
}

}  // namespace sgloop
