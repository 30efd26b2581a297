#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "sgloop/class_map.hpp"
#include "sgloop/common.hpp"
#include "sgloop/point_cloud.hpp"

namespace sgloop {

// Fixed-capacity node set for one scan. Valid slots carry a one-hot semantic row,
// a centroid and an axis-aligned bounding box; pseudo-node slots are all-zero.
struct SemanticGraph {
    int max_nodes = 50;
    int num_classes = 12;
    std::vector<std::uint8_t> mask;  // 1 = real node
    Eigen::MatrixXd sem;             // max_nodes x C
    Eigen::MatrixXd cen;             // max_nodes x 3
    Eigen::MatrixXd bbox;            // max_nodes x 6 (min_x..z, max_x..z)

    static SemanticGraph zero(int max_nodes, int num_classes) {
        SemanticGraph g;
        g.max_nodes = max_nodes;
        g.num_classes = num_classes;
        g.mask.assign(static_cast<std::size_t>(max_nodes), 0);
        g.sem = Eigen::MatrixXd::Zero(max_nodes, num_classes);
        g.cen = Eigen::MatrixXd::Zero(max_nodes, 3);
        g.bbox = Eigen::MatrixXd::Zero(max_nodes, 6);
        return g;
    }

    int valid_count() const {
        return static_cast<int>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
    }

    std::vector<int> valid_slots() const {
        std::vector<int> idx;
        for (int i = 0; i < max_nodes; ++i) {
            if (mask[static_cast<std::size_t>(i)]) idx.push_back(i);
        }
        return idx;
    }

    void validate() const {
        if (sem.rows() != max_nodes || cen.rows() != max_nodes || bbox.rows() != max_nodes ||
            static_cast<int>(mask.size()) != max_nodes || sem.cols() != num_classes) {
            throw DataError("SemanticGraph has inconsistent shapes");
        }
        for (int i = 0; i < max_nodes; ++i) {
            if (!mask[static_cast<std::size_t>(i)]) {
                if (sem.row(i).cwiseAbs().sum() != 0.0 || cen.row(i).cwiseAbs().sum() != 0.0 ||
                    bbox.row(i).cwiseAbs().sum() != 0.0) {
                    throw DataError("pseudo-node slot carries nonzero attributes");
                }
                continue;
            }
            if (std::abs(sem.row(i).sum() - 1.0) > 1e-12) {
                throw DataError("one-hot row does not sum to 1");
            }
            for (int d = 0; d < 3; ++d) {
                if (bbox(i, d) > cen(i, d) + 1e-9 || cen(i, d) > bbox(i, d + 3) + 1e-9) {
                    throw DataError("centroid outside its bounding box");
                }
            }
        }
    }
};

struct GraphBuildOptions {
    int max_nodes = 50;
    int min_points = 5;            // instances below this are noise fragments
    double cluster_voxel = 1.0;    // voxel size for clustering instance-0 points
    bool random_subsample = true;  // train mode; eval prefers large instances
};

namespace detail {

// Per-class voxel-grid connected components (26-connectivity) for points without
// an instance id, so stuff classes like building/vegetation still produce nodes.
inline std::vector<std::vector<std::size_t>> voxel_components(
    const std::vector<Eigen::Vector3d>& pts, const std::vector<std::size_t>& indices,
    double voxel) {
    struct Key {
        long x, y, z;
        bool operator==(const Key& o) const { return x == o.x && y == o.y && z == o.z; }
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            return static_cast<std::size_t>(k.x * 73856093L ^ k.y * 19349663L ^ k.z * 83492791L);
        }
    };
    std::unordered_map<Key, std::vector<std::size_t>, KeyHash> grid;
    auto key_of = [voxel](const Eigen::Vector3d& p) {
        return Key{static_cast<long>(std::floor(p.x() / voxel)),
                   static_cast<long>(std::floor(p.y() / voxel)),
                   static_cast<long>(std::floor(p.z() / voxel))};
    };
    for (std::size_t idx : indices) grid[key_of(pts[idx])].push_back(idx);

    std::unordered_map<Key, int, KeyHash> component;
    std::vector<std::vector<Key>> buckets;
    for (const auto& [key, _] : grid) {
        if (component.count(key)) continue;
        const int id = static_cast<int>(buckets.size());
        buckets.emplace_back();
        std::vector<Key> stack{key};
        component[key] = id;
        while (!stack.empty()) {
            const Key cur = stack.back();
            stack.pop_back();
            buckets[static_cast<std::size_t>(id)].push_back(cur);
            for (long dx = -1; dx <= 1; ++dx) {
                for (long dy = -1; dy <= 1; ++dy) {
                    for (long dz = -1; dz <= 1; ++dz) {
                        const Key nb{cur.x + dx, cur.y + dy, cur.z + dz};
                        if (grid.count(nb) && !component.count(nb)) {
                            component[nb] = id;
                            stack.push_back(nb);
                        }
                    }
                }
            }
        }
    }
    std::vector<std::vector<std::size_t>> out(buckets.size());
    for (std::size_t c = 0; c < buckets.size(); ++c) {
        for (const Key& k : buckets[c]) {
            const auto& members = grid[k];
            out[c].insert(out[c].end(), members.begin(), members.end());
        }
    }
    return out;
}

struct NodeCandidate {
    int cls = 0;
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    Eigen::Matrix<double, 6, 1> box = Eigen::Matrix<double, 6, 1>::Zero();
    std::size_t point_count = 0;
};

inline NodeCandidate summarize(const std::vector<Eigen::Vector3d>& pts,
                               const std::vector<std::size_t>& members, int cls) {
    NodeCandidate c;
    c.cls = cls;
    c.point_count = members.size();
    Eigen::Vector3d lo = pts[members[0]];
    Eigen::Vector3d hi = pts[members[0]];
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (std::size_t idx : members) {
        const auto& p = pts[idx];
        sum += p;
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    c.centroid = sum / static_cast<double>(members.size());
    c.box << lo.x(), lo.y(), lo.z(), hi.x(), hi.y(), hi.z();
    return c;
}

}  // namespace detail

// One node per retained instance. Instances above the cap are uniformly subsampled
// (seeded) in training mode; eval mode keeps the largest instances. Node slots are
// ordered by descending point count so the graph is a pure function of the point set.
inline SemanticGraph build_graph(const LabeledPointCloud& cloud, int max_nodes,
                                 std::uint64_t seed, const GraphBuildOptions& opts_in = {}) {
    GraphBuildOptions opts = opts_in;
    opts.max_nodes = max_nodes;
    const int num_classes = [&cloud] {
        int c = 0;
        for (auto s : cloud.semantic) c = std::max(c, static_cast<int>(s) + 1);
        return std::max(c, cls::kSemanticKittiClasses);
    }();

    // Group by instance id; instance 0 points are re-clustered per class.
    std::map<std::uint32_t, std::vector<std::size_t>> by_instance;
    std::map<int, std::vector<std::size_t>> unassigned_by_class;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.instance[i] == 0) {
            unassigned_by_class[cloud.semantic[i]].push_back(i);
        } else {
            by_instance[cloud.instance[i]].push_back(i);
        }
    }

    std::vector<detail::NodeCandidate> candidates;
    for (const auto& [inst, members] : by_instance) {
        if (members.size() < static_cast<std::size_t>(opts.min_points)) continue;
        // Majority class; ties go to the lower class id.
        std::map<int, std::size_t> hist;
        for (std::size_t idx : members) hist[cloud.semantic[idx]]++;
        int best_cls = hist.begin()->first;
        std::size_t best_n = hist.begin()->second;
        for (const auto& [c, n] : hist) {
            if (n > best_n) {
                best_cls = c;
                best_n = n;
            }
        }
        candidates.push_back(detail::summarize(cloud.points, members, best_cls));
    }
    for (const auto& [c, indices] : unassigned_by_class) {
        for (const auto& comp :
             detail::voxel_components(cloud.points, indices, opts.cluster_voxel)) {
            if (comp.size() < static_cast<std::size_t>(opts.min_points)) continue;
            candidates.push_back(detail::summarize(cloud.points, comp, c));
        }
    }

    // Content-based order: larger instances first, then class, then centroid.
    std::sort(candidates.begin(), candidates.end(),
              [](const detail::NodeCandidate& a, const detail::NodeCandidate& b) {
                  if (a.point_count != b.point_count) return a.point_count > b.point_count;
                  if (a.cls != b.cls) return a.cls < b.cls;
                  for (int d = 0; d < 3; ++d) {
                      if (a.centroid[d] != b.centroid[d]) return a.centroid[d] < b.centroid[d];
                  }
                  return false;
              });

    if (static_cast<int>(candidates.size()) > max_nodes) {
        if (opts.random_subsample) {
            std::vector<std::size_t> order(candidates.size());
            std::iota(order.begin(), order.end(), 0);
            Rng rng = make_rng(derive_seed(seed, 0x6b1d));
            std::shuffle(order.begin(), order.end(), rng);
            order.resize(static_cast<std::size_t>(max_nodes));
            std::sort(order.begin(), order.end());
            std::vector<detail::NodeCandidate> kept;
            kept.reserve(order.size());
            for (std::size_t idx : order) kept.push_back(candidates[idx]);
            candidates = std::move(kept);
        } else {
            candidates.resize(static_cast<std::size_t>(max_nodes));
        }
    }

    SemanticGraph g = SemanticGraph::zero(max_nodes, num_classes);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        const auto row = static_cast<Eigen::Index>(i);
        g.mask[i] = 1;
        g.sem(row, c.cls) = 1.0;
        g.cen.row(row) = c.centroid.transpose();
        g.bbox.row(row) = c.box.transpose();
    }
    return g;
}

// ---------------------------------------------------------------------------
// Graph cache: single binary record per scan.
// Layout: magic "SGRC", u32 version, u64 config_hash, u32 C, u32 max_nodes,
// mask bytes, then sem/cen/bbox row-major doubles in that order.

inline constexpr std::uint32_t kGraphCacheVersion = 1;

inline void cache_graph(const SemanticGraph& g, const std::string& path,
                        std::uint64_t config_hash = 0) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot open graph cache for writing: " + path);
        out.write("SGRC", 4);
        io::write_pod<std::uint32_t>(out, kGraphCacheVersion);
        io::write_pod<std::uint64_t>(out, config_hash);
        io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(g.num_classes));
        io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(g.max_nodes));
        out.write(reinterpret_cast<const char*>(g.mask.data()),
                  static_cast<std::streamsize>(g.mask.size()));
        auto write_matrix = [&out](const Eigen::MatrixXd& m) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                for (Eigen::Index c = 0; c < m.cols(); ++c) io::write_pod<double>(out, m(r, c));
            }
        };
        write_matrix(g.sem);
        write_matrix(g.cen);
        write_matrix(g.bbox);
        if (!out) throw DataError("failed writing graph cache: " + path);
    }
    fs::rename(tmp, target);  // write-to-temp-then-rename keeps concurrent readers safe
}

inline SemanticGraph load_graph(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open graph cache: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "SGRC") {
        throw DataError("bad graph cache magic in " + path);
    }
    const auto version = io::read_pod<std::uint32_t>(in, "graph cache version");
    if (version != kGraphCacheVersion) {
        throw DataError("unsupported graph cache version " + std::to_string(version) + " in " +
                        path);
    }
    io::read_pod<std::uint64_t>(in, "graph cache config hash");
    const auto num_classes = io::read_pod<std::uint32_t>(in, "graph cache class count");
    const auto max_nodes = io::read_pod<std::uint32_t>(in, "graph cache node cap");
    SemanticGraph g =
        SemanticGraph::zero(static_cast<int>(max_nodes), static_cast<int>(num_classes));
    in.read(reinterpret_cast<char*>(g.mask.data()), static_cast<std::streamsize>(g.mask.size()));
    if (!in) throw DataError("truncated graph cache: " + path);
    auto read_matrix = [&in, &path](Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = io::read_pod<double>(in, path.c_str());
            }
        }
    };
    read_matrix(g.sem);
    read_matrix(g.cen);
    read_matrix(g.bbox);
    return g;
}

}  // namespace sgloop
