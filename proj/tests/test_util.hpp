#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sgloop/model.hpp"
#include "sgloop/semantic_graph.hpp"

namespace test_util {

// Small architecture so finite-difference sweeps stay fast.
inline sgloop::ModelConfig tiny_config() {
    sgloop::ModelConfig cfg;
    cfg.num_classes = 6;
    cfg.max_nodes = 10;
    cfg.embed_dim = 8;
    cfg.heads = 2;
    cfg.knn = 3;
    cfg.sim_dim = 4;
    cfg.fc_hidden = 4;
    return cfg;
}

inline sgloop::SemanticGraph random_graph(std::uint64_t seed, int n_valid, int max_nodes,
                                          int num_classes,
                                          const std::vector<int>& slots = {}) {
    sgloop::SemanticGraph g = sgloop::SemanticGraph::zero(max_nodes, num_classes);
    sgloop::Rng rng = sgloop::make_rng(seed);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::uniform_int_distribution<int> cls(0, num_classes - 1);
    std::vector<int> chosen = slots;
    if (chosen.empty()) {
        for (int i = 0; i < n_valid; ++i) chosen.push_back(i);
    }
    for (int slot : chosen) {
        g.mask[static_cast<std::size_t>(slot)] = 1;
        g.sem(slot, cls(rng)) = 1.0;
        for (int d = 0; d < 3; ++d) {
            g.cen(slot, d) = u(rng);
            g.bbox(slot, d) = g.cen(slot, d) - std::abs(u(rng)) * 0.2 - 0.1;
            g.bbox(slot, d + 3) = g.cen(slot, d) + std::abs(u(rng)) * 0.2 + 0.1;
        }
    }
    return g;
}

// Scratch directory under the build tree, unique per test tag.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("sgloop_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Normwise relative disagreement between an analytic and a numeric gradient.
inline double gradient_rel_error(const Eigen::MatrixXd& analytic,
                                 const Eigen::MatrixXd& numeric) {
    const double scale =
        std::max({1.0, analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff()});
    return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

}  // namespace test_util
