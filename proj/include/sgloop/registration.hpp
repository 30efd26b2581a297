#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "sgloop/class_map.hpp"
#include "sgloop/common.hpp"
#include "sgloop/geometry.hpp"
#include "sgloop/point_cloud.hpp"
#include "sgloop/semantic_graph.hpp"

namespace sgloop {

// Per-class residual weights: clearly distinguishable classes count more.
struct SemanticWeights {
    std::map<int, double> overrides;
    double default_weight = 0.8;

    static SemanticWeights defaults() {
        SemanticWeights w;
        w.overrides = {{cls::kTrafficSign, 1.2}, {cls::kPole, 1.2}, {cls::kBuilding, 1.2}};
        return w;
    }

    double of(int cls_id) const {
        auto it = overrides.find(cls_id);
        const double w = it == overrides.end() ? default_weight : it->second;
        if (w <= 0.0) throw DataError("semantic weights must be positive");
        return w;
    }
};

struct RegistrationConfig {
    std::vector<int> dynamic_classes = {cls::kCar, cls::kOtherVehicle, cls::kTruck};
    int num_rings = 16;
    int curvature_half_window = 5;  // m points per side
    double edge_threshold = 0.1;
    double surface_threshold = 0.05;
    int max_edge_per_ring = 20;
    int max_surface_per_ring = 80;
    double max_azimuth_gap = 0.1;  // rad; curvature windows across gaps are invalid
    double range_jump = 0.5;       // m; occlusion-boundary guard for edge picks
    int nn_count = 5;
    double nn_max_radius = 2.0;
    double line_eigen_ratio = 3.0;   // largest/second eigenvalue for a valid line
    double plane_fit_tol = 0.02;     // max point-plane distance of the fit set
    double trim_multiplier = 5.0;    // drop residuals above this multiple of the median
    int max_outer_iterations = 10;
    int max_inner_iterations = 5;
    double update_tolerance = 1e-7;  // pose update norm declaring convergence
    double fitness_threshold = 0.3;  // m, mean weighted residual for acceptance
    bool coarse_init = true;
    SemanticWeights weights = SemanticWeights::defaults();
};

// Removes every point of a configured dynamic class; static classes untouched.
inline LabeledPointCloud filter_dynamic(const LabeledPointCloud& cloud,
                                        const std::vector<int>& dynamic_classes) {
    LabeledPointCloud out;
    out.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (std::find(dynamic_classes.begin(), dynamic_classes.end(),
                      static_cast<int>(cloud.semantic[i])) != dynamic_classes.end()) {
            continue;
        }
        out.push_back(cloud.points[i], cloud.semantic[i], cloud.instance[i]);
    }
    return out;
}

struct Keypoint {
    Eigen::Vector3d point;
    int cls = 0;
    double smoothness = 0.0;
};

struct KeypointSet {
    std::vector<Keypoint> edges;
    std::vector<Keypoint> surfaces;
};

namespace reg_detail {

struct RingPoint {
    Eigen::Vector3d p;
    int cls;
    double azimuth;
    double range;
};

// Organize by elevation into rings, sorted by azimuth within each ring.
inline std::vector<std::vector<RingPoint>> organize_rings(const LabeledPointCloud& cloud,
                                                          int num_rings) {
    std::vector<std::vector<RingPoint>> rings(static_cast<std::size_t>(num_rings));
    if (cloud.empty()) return rings;
    double emin = std::numeric_limits<double>::infinity();
    double emax = -std::numeric_limits<double>::infinity();
    std::vector<double> elev(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& p = cloud.points[i];
        elev[i] = std::atan2(p.z(), std::hypot(p.x(), p.y()));
        emin = std::min(emin, elev[i]);
        emax = std::max(emax, elev[i]);
    }
    const double span = std::max(emax - emin, 1e-9);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        int r = static_cast<int>((elev[i] - emin) / span * num_rings);
        r = std::clamp(r, 0, num_rings - 1);
        double az = std::atan2(cloud.points[i].y(), cloud.points[i].x());
        if (az < 0) az += 2.0 * M_PI;
        rings[static_cast<std::size_t>(r)].push_back(
            {cloud.points[i], cloud.semantic[i], az, cloud.points[i].norm()});
    }
    for (auto& ring : rings) {
        std::sort(ring.begin(), ring.end(),
                  [](const RingPoint& a, const RingPoint& b) { return a.azimuth < b.azimuth; });
    }
    return rings;
}

inline double azimuth_gap(double a, double b) {
    double d = std::abs(a - b);
    return std::min(d, 2.0 * M_PI - d);
}

}  // namespace reg_detail

// F-LOAM style smoothness over 2m ring neighbors:
//   c_i = || sum_j (p_j - p_i) ||^2 / (2m).
// High-curvature points become edge keypoints, low-curvature ones surface
// keypoints, capped per ring with local suppression. Windows spanning azimuth
// gaps are invalid; points on the far side of a range jump (partially occluded
// background) are viewpoint artifacts and never become edges.
inline KeypointSet extract_keypoints(const LabeledPointCloud& cloud,
                                     const RegistrationConfig& cfg) {
    KeypointSet out;
    const int m = cfg.curvature_half_window;
    const auto rings = reg_detail::organize_rings(cloud, cfg.num_rings);
    for (const auto& ring : rings) {
        const int n = static_cast<int>(ring.size());
        if (n < 2 * m + 1) continue;  // too sparse for the window

        std::vector<double> smooth(static_cast<std::size_t>(n), -1.0);
        std::vector<bool> pickable(static_cast<std::size_t>(n), false);
        for (int i = 0; i < n; ++i) {
            Eigen::Vector3d diff_sum = Eigen::Vector3d::Zero();
            bool valid = true;
            bool occluded_side = false;
            const double range_i = ring[static_cast<std::size_t>(i)].range;
            for (int o = -m; o <= m; ++o) {
                const int j = ((i + o) % n + n) % n;  // rings are cyclic in azimuth
                if (o != 0) {
                    const int prev = ((i + o - 1) % n + n) % n;
                    if (reg_detail::azimuth_gap(ring[static_cast<std::size_t>(j)].azimuth,
                                                ring[static_cast<std::size_t>(prev)].azimuth) >
                        cfg.max_azimuth_gap) {
                        valid = false;
                        break;
                    }
                    if (range_i - ring[static_cast<std::size_t>(j)].range > cfg.range_jump) {
                        occluded_side = true;  // something closer cuts the window
                    }
                }
                diff_sum += ring[static_cast<std::size_t>(j)].p -
                            ring[static_cast<std::size_t>(i)].p;
            }
            if (!valid) continue;
            smooth[static_cast<std::size_t>(i)] = diff_sum.squaredNorm() / (2.0 * m);
            pickable[static_cast<std::size_t>(i)] = !occluded_side;
        }

        auto pick = [&](bool edges) {
            std::vector<int> order;
            for (int i = 0; i < n; ++i) {
                const double c = smooth[static_cast<std::size_t>(i)];
                if (c < 0) continue;
                if (edges && (c <= cfg.edge_threshold || !pickable[static_cast<std::size_t>(i)]))
                    continue;
                if (!edges && c >= cfg.surface_threshold) continue;
                order.push_back(i);
            }
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                const double ca = smooth[static_cast<std::size_t>(a)];
                const double cb = smooth[static_cast<std::size_t>(b)];
                return edges ? ca > cb : ca < cb;
            });
            std::vector<bool> suppressed(static_cast<std::size_t>(n), false);
            const int cap = edges ? cfg.max_edge_per_ring : cfg.max_surface_per_ring;
            int taken = 0;
            for (int i : order) {
                if (taken >= cap) break;
                if (suppressed[static_cast<std::size_t>(i)]) continue;
                const auto& rp = ring[static_cast<std::size_t>(i)];
                (edges ? out.edges : out.surfaces)
                    .push_back({rp.p, rp.cls, smooth[static_cast<std::size_t>(i)]});
                ++taken;
                for (int o = -m; o <= m; ++o) {
                    suppressed[static_cast<std::size_t>(((i + o) % n + n) % n)] = true;
                }
            }
        };
        pick(true);
        pick(false);
    }
    return out;
}

// Label-partitioned nearest-neighbor index over the target scan.
class TargetIndex {
public:
    explicit TargetIndex(const LabeledPointCloud& cloud) {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            by_class_[cloud.semantic[i]].push_back(cloud.points[i]);
        }
    }

    // k nearest same-label points within the radius; fewer than k means no match.
    std::vector<Eigen::Vector3d> knn(const Eigen::Vector3d& p, int cls_id, int k,
                                     double max_radius) const {
        auto it = by_class_.find(cls_id);
        if (it == by_class_.end()) return {};
        const auto& pts = it->second;
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(pts.size());
        const double r2 = max_radius * max_radius;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double d2 = (pts[i] - p).squaredNorm();
            if (d2 <= r2) dist.emplace_back(d2, i);
        }
        if (dist.size() < static_cast<std::size_t>(k)) return {};
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        std::vector<Eigen::Vector3d> out;
        out.reserve(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) out.push_back(pts[dist[static_cast<std::size_t>(i)].second]);
        return out;
    }

private:
    std::map<int, std::vector<Eigen::Vector3d>> by_class_;
};

struct LineTarget {
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
    Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
};

struct PlaneTarget {
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
    double offset = 0.0;  // n . x + offset = 0
};

inline double residual_point_line(const Eigen::Vector3d& p, const LineTarget& line) {
    const double len = line.direction.norm();
    if (len < 1e-12) throw NumericalError("degenerate line direction");
    return ((p - line.point).cross(line.direction / len)).norm();
}

inline double residual_point_plane(const Eigen::Vector3d& p, const PlaneTarget& plane) {
    const double len = plane.normal.norm();
    if (len < 1e-12) throw NumericalError("degenerate plane normal");
    return (plane.normal.dot(p) + plane.offset) / len;
}

struct Correspondence {
    Eigen::Vector3d source;  // original source-frame keypoint
    bool is_edge = false;
    LineTarget line;
    PlaneTarget plane;
    double weight = 1.0;
};

// Fits a line through the principal axis of the sample.
inline std::optional<LineTarget> fit_line(const std::vector<Eigen::Vector3d>& pts,
                                          double eigen_ratio) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const auto& ev = es.eigenvalues();  // ascending
    if (ev(2) < eigen_ratio * std::max(ev(1), 1e-12)) return std::nullopt;
    return LineTarget{mean, es.eigenvectors().col(2)};
}

// Fits a plane via the smallest covariance axis; all sample points must lie
// within tolerance or the neighborhood is not planar.
inline std::optional<PlaneTarget> fit_plane(const std::vector<Eigen::Vector3d>& pts,
                                            double fit_tol) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const Eigen::Vector3d n = es.eigenvectors().col(0);
    const double d = -n.dot(mean);
    for (const auto& p : pts) {
        if (std::abs(n.dot(p) + d) > fit_tol) return std::nullopt;
    }
    return PlaneTarget{n, d};
}

// Label-constrained association under the current pose guess. Edge keypoints get
// best-fit lines, surface keypoints best-fit planes; degenerate fits are dropped.
inline std::vector<Correspondence> associate(const KeypointSet& keypoints,
                                             const TargetIndex& target, const PoseSE3& guess,
                                             const RegistrationConfig& cfg) {
    std::vector<Correspondence> out;
    for (const auto& kp : keypoints.edges) {
        const Eigen::Vector3d q = guess.apply(kp.point);
        const auto nbrs = target.knn(q, kp.cls, cfg.nn_count, cfg.nn_max_radius);
        if (nbrs.empty()) continue;
        const auto line = fit_line(nbrs, cfg.line_eigen_ratio);
        if (!line) continue;
        Correspondence c;
        c.source = kp.point;
        c.is_edge = true;
        c.line = *line;
        c.weight = cfg.weights.of(kp.cls);
        out.push_back(c);
    }
    for (const auto& kp : keypoints.surfaces) {
        const Eigen::Vector3d q = guess.apply(kp.point);
        const auto nbrs = target.knn(q, kp.cls, cfg.nn_count, cfg.nn_max_radius);
        if (nbrs.empty()) continue;
        const auto plane = fit_plane(nbrs, cfg.plane_fit_tol);
        if (!plane) continue;
        Correspondence c;
        c.source = kp.point;
        c.is_edge = false;
        c.plane = *plane;
        c.weight = cfg.weights.of(kp.cls);
        out.push_back(c);
    }
    return out;
}

struct SolveResult {
    PoseSE3 pose;
    double fitness = std::numeric_limits<double>::infinity();
    bool converged = false;
    std::size_t correspondence_count = 0;
    // Accepted objective values, one list per outer (re-association) round;
    // the objective is monotone within each round by construction of the accept test.
    std::vector<std::vector<double>> objective_history;
};

namespace reg_detail {

inline double cost_of(const std::vector<Correspondence>& cs, const PoseSE3& pose) {
    double cost = 0.0;
    for (const auto& c : cs) {
        const Eigen::Vector3d p = pose.apply(c.source);
        if (c.is_edge) {
            cost += c.weight * (p - c.line.point).cross(c.line.direction).squaredNorm();
        } else {
            const double r = c.plane.normal.dot(p) + c.plane.offset;
            cost += c.weight * r * r;
        }
    }
    return cost;
}

// Weighted mean absolute residual in meters; scale-invariant under uniform
// weight scaling, which keeps the verification threshold meaningful.
inline double fitness_of(const std::vector<Correspondence>& cs, const PoseSE3& pose) {
    if (cs.empty()) return std::numeric_limits<double>::infinity();
    double num = 0.0;
    double den = 0.0;
    for (const auto& c : cs) {
        const Eigen::Vector3d p = pose.apply(c.source);
        const double r = c.is_edge
                             ? (p - c.line.point).cross(c.line.direction).norm()
                             : std::abs(c.plane.normal.dot(p) + c.plane.offset);
        num += c.weight * r;
        den += c.weight;
    }
    return num / den;
}

}  // namespace reg_detail

// One LM pass over a fixed correspondence set. Left-multiplicative increment:
// pose <- Exp(delta) * pose.
inline std::pair<PoseSE3, std::vector<double>> lm_refine(const std::vector<Correspondence>& cs,
                                                         const PoseSE3& init,
                                                         const RegistrationConfig& cfg,
                                                         double* update_norm = nullptr) {
    PoseSE3 pose = init;
    double lambda = 1e-4;
    double cost = reg_detail::cost_of(cs, pose);
    std::vector<double> accepted{cost};
    double total_update = 0.0;

    for (int iter = 0; iter < cfg.max_inner_iterations; ++iter) {
        Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
        Vector6d g = Vector6d::Zero();
        for (const auto& c : cs) {
            const Eigen::Vector3d p = pose.apply(c.source);
            if (c.is_edge) {
                const Eigen::Vector3d r = (p - c.line.point).cross(c.line.direction);
                Eigen::Matrix<double, 3, 6> jac;
                const Eigen::Matrix3d dr_dp = -skew(c.line.direction);
                jac.block<3, 3>(0, 0) = dr_dp * (-skew(p));
                jac.block<3, 3>(0, 3) = dr_dp;
                h += c.weight * jac.transpose() * jac;
                g += c.weight * jac.transpose() * r;
            } else {
                const double r = c.plane.normal.dot(p) + c.plane.offset;
                Eigen::Matrix<double, 1, 6> jac;
                jac.block<1, 3>(0, 0) = -c.plane.normal.transpose() * skew(p);
                jac.block<1, 3>(0, 3) = c.plane.normal.transpose();
                h += c.weight * jac.transpose() * jac;
                g += c.weight * jac.transpose() * r;
            }
        }
        if (!h.allFinite()) throw NumericalError("non-finite normal equations");
        if (iter == 0) {
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(h);
            if (es.eigenvalues()(0) < 1e-9 * std::max(es.eigenvalues()(5), 1e-12)) {
                throw NumericalError(
                    "rank-deficient normal equations: correspondences do not constrain "
                    "all six degrees of freedom");
            }
        }

        bool stepped = false;
        for (int attempt = 0; attempt < 6; ++attempt) {
            Eigen::Matrix<double, 6, 6> damped = h;
            damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
            Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(damped);
            if (ldlt.info() != Eigen::Success) {
                throw NumericalError("rank-deficient normal equations in pose solve");
            }
            const Vector6d delta = ldlt.solve(-g);
            if (!delta.allFinite()) {
                throw NumericalError("rank-deficient normal equations in pose solve");
            }
            PoseSE3 candidate = se3_exp(delta) * pose;
            candidate.orthonormalize();
            const double c_cost = reg_detail::cost_of(cs, candidate);
            if (c_cost < cost) {
                pose = candidate;
                cost = c_cost;
                accepted.push_back(cost);
                lambda = std::max(lambda / 3.0, 1e-9);
                total_update += delta.norm();
                stepped = true;
                break;
            }
            lambda *= 5.0;
        }
        if (!stepped) break;
    }
    if (update_norm) *update_norm = total_update;
    return {pose, accepted};
}

// Outer loop: re-associate, refine, repeat. Convergence is declared when an
// outer round moves the pose by less than the tolerance.
inline SolveResult solve_pose(const KeypointSet& keypoints, const TargetIndex& target,
                              const PoseSE3& init, const RegistrationConfig& cfg) {
    SolveResult res;
    res.pose = init;
    for (int outer = 0; outer < cfg.max_outer_iterations; ++outer) {
        std::vector<Correspondence> cs = associate(keypoints, target, res.pose, cfg);
        // Trim gross outliers relative to the current residual distribution.
        if (cs.size() >= 12 && cfg.trim_multiplier > 0) {
            std::vector<double> abs_r;
            abs_r.reserve(cs.size());
            for (const auto& c : cs) {
                const Eigen::Vector3d p = res.pose.apply(c.source);
                abs_r.push_back(c.is_edge
                                    ? (p - c.line.point).cross(c.line.direction).norm()
                                    : std::abs(c.plane.normal.dot(p) + c.plane.offset));
            }
            std::vector<double> sorted = abs_r;
            std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2),
                             sorted.end());
            const double cutoff =
                std::max(cfg.trim_multiplier * sorted[sorted.size() / 2], 0.05);
            std::vector<Correspondence> kept;
            kept.reserve(cs.size());
            for (std::size_t i = 0; i < cs.size(); ++i) {
                if (abs_r[i] <= cutoff) kept.push_back(cs[i]);
            }
            if (kept.size() >= 12) cs = std::move(kept);
        }
        if (cs.size() < 6) {
            throw NumericalError("too few correspondences to constrain the pose (" +
                                 std::to_string(cs.size()) + ")");
        }
        double update = 0.0;
        auto [pose, history] = lm_refine(cs, res.pose, cfg, &update);
        res.pose = pose;
        res.objective_history.push_back(std::move(history));
        res.correspondence_count = cs.size();
        res.fitness = reg_detail::fitness_of(cs, res.pose);
        if (update < cfg.update_tolerance) {
            res.converged = true;
            break;
        }
    }
    return res;
}

inline bool verify(double fitness, double threshold) { return fitness < threshold; }

// Yaw grid search over same-class instance centroids, then a closed-form refine
// over the inlier matches. Gives LM a basin-of-attraction start for loop pairs
// whose relative yaw can reach +-30 degrees.
inline PoseSE3 coarse_align(const LabeledPointCloud& source, const LabeledPointCloud& target) {
    GraphBuildOptions opts;
    opts.min_points = 8;
    opts.random_subsample = false;
    const SemanticGraph gs = build_graph(source, 64, 0, opts);
    const SemanticGraph gt = build_graph(target, 64, 0, opts);

    struct Node {
        int cls;
        Eigen::Vector3d c;
    };
    auto nodes_of = [](const SemanticGraph& g) {
        std::vector<Node> nodes;
        for (int i : g.valid_slots()) {
            int cls_id = 0;
            g.sem.row(i).maxCoeff(&cls_id);
            nodes.push_back({cls_id, g.cen.row(i).transpose()});
        }
        return nodes;
    };
    const auto src = nodes_of(gs);
    const auto dst = nodes_of(gt);
    if (src.size() < 3 || dst.size() < 3) return PoseSE3::identity();

    PoseSE3 best = PoseSE3::identity();
    int best_score = -1;
    for (double yaw = -35.0; yaw <= 35.0 + 1e-9; yaw += 2.5) {
        const PoseSE3 rot = PoseSE3::from_yaw(yaw * M_PI / 180.0);
        std::vector<double> dx, dy, dz;
        for (const auto& s : src) {
            const Eigen::Vector3d sp = rot.apply(s.c);
            double bd = std::numeric_limits<double>::infinity();
            Eigen::Vector3d match = Eigen::Vector3d::Zero();
            for (const auto& d : dst) {
                if (d.cls != s.cls) continue;
                const double dist = (d.c - sp).squaredNorm();
                if (dist < bd) {
                    bd = dist;
                    match = d.c;
                }
            }
            if (!std::isfinite(bd)) continue;
            dx.push_back(match.x() - sp.x());
            dy.push_back(match.y() - sp.y());
            dz.push_back(match.z() - sp.z());
        }
        if (dx.size() < 3) continue;
        auto median = [](std::vector<double> v) {
            std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
            return v[v.size() / 2];
        };
        const Eigen::Vector3d t(median(dx), median(dy), median(dz));
        int score = 0;
        for (const auto& s : src) {
            const Eigen::Vector3d sp = rot.apply(s.c) + t;
            for (const auto& d : dst) {
                if (d.cls != s.cls) continue;
                if ((d.c - sp).norm() < 1.0) {
                    ++score;
                    break;
                }
            }
        }
        if (score > best_score) {
            best_score = score;
            best = PoseSE3{rot.rotation, t};
        }
    }
    if (best_score < 3) return PoseSE3::identity();

    // Closed-form refinement on the inlier matches of the winning grid cell.
    std::vector<Eigen::Vector3d> sp, dp;
    for (const auto& s : src) {
        const Eigen::Vector3d moved = best.apply(s.c);
        double bd = std::numeric_limits<double>::infinity();
        Eigen::Vector3d match = Eigen::Vector3d::Zero();
        for (const auto& d : dst) {
            if (d.cls != s.cls) continue;
            const double dist = (d.c - moved).norm();
            if (dist < bd) {
                bd = dist;
                match = d.c;
            }
        }
        if (bd < 1.0) {
            sp.push_back(s.c);
            dp.push_back(match);
        }
    }
    if (sp.size() >= 3) {
        try {
            return rigid_align(sp, dp);
        } catch (const DataError&) {
        }
    }
    return best;
}

struct RegistrationResult {
    PoseSE3 pose;  // maps source-frame points into the target frame
    double fitness = std::numeric_limits<double>::infinity();
    bool accepted = false;
    bool converged = false;
    std::size_t correspondence_count = 0;
    std::vector<std::vector<double>> objective_history;
};

// Full pipeline for one candidate pair: dynamic removal, keypoints, optional
// coarse alignment, LM refinement, fitness verification.
inline RegistrationResult register_scans(const LabeledPointCloud& source,
                                         const LabeledPointCloud& target,
                                         const RegistrationConfig& cfg = {},
                                         const PoseSE3& init = PoseSE3::identity()) {
    const LabeledPointCloud src = filter_dynamic(source, cfg.dynamic_classes);
    const LabeledPointCloud tgt = filter_dynamic(target, cfg.dynamic_classes);
    const KeypointSet keypoints = extract_keypoints(src, cfg);
    const TargetIndex index(tgt);

    // An explicit initial guess (e.g. from odometry) wins; an identity init means
    // the relative pose is unknown, which is where the coarse search pays off.
    PoseSE3 start = init;
    const bool init_is_identity =
        init.translation.norm() < 1e-12 && rotation_angle(init.rotation) < 1e-12;
    if (cfg.coarse_init && init_is_identity) {
        start = coarse_align(src, tgt);
    }

    SolveResult solved = solve_pose(keypoints, index, start, cfg);
    RegistrationResult out;
    out.pose = solved.pose;
    out.fitness = solved.fitness;
    out.converged = solved.converged;
    out.correspondence_count = solved.correspondence_count;
    out.objective_history = std::move(solved.objective_history);
    out.accepted = solved.converged && verify(out.fitness, cfg.fitness_threshold);
    return out;
}

}  // namespace sgloop
