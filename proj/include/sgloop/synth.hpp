#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "sgloop/class_map.hpp"
#include "sgloop/common.hpp"
#include "sgloop/geometry.hpp"
#include "sgloop/kitti_io.hpp"
#include "sgloop/pairs.hpp"
#include "sgloop/point_cloud.hpp"

namespace sgloop::synth {

// Desk-scale LiDAR simulator. Scenes are collections of axis-aligned boxes tagged
// with the 12-class vocabulary; scans are rendered by casting rings of rays from
// the sensor pose, so the output has the elevation-ring structure the feature
// extractor expects and exact instance ids for graph building.

struct Primitive {
    int cls = 0;
    std::uint32_t instance_id = 0;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d half = Eigen::Vector3d::Ones();
};

using World = std::vector<Primitive>;

struct RenderParams {
    int rings = 16;
    double elevation_min = -0.35;  // rad
    double elevation_max = 0.05;
    int azimuth_steps = 600;
    double min_range = 0.5;
    double max_range = 60.0;
    double sensor_height = 1.6;
};

// Viewpoint and measurement noise applied to revisit renders. All zero means the
// revisit is bit-identical to the first visit.
struct NoiseParams {
    double yaw_jitter = M_PI;        // uniform in +-value
    double trans_jitter = 1.5;       // m, uniform per horizontal axis
    double point_sigma = 0.02;       // m, gaussian per coordinate
    double instance_dropout = 0.1;   // probability a non-ground instance vanishes
};

namespace detail {

inline double ray_box(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                      const Primitive& box, double t_min, double t_max) {
    double lo = t_min;
    double hi = t_max;
    for (int a = 0; a < 3; ++a) {
        const double mn = box.center[a] - box.half[a];
        const double mx = box.center[a] + box.half[a];
        if (std::abs(dir[a]) < 1e-12) {
            if (origin[a] < mn || origin[a] > mx) return std::numeric_limits<double>::infinity();
            continue;
        }
        double t1 = (mn - origin[a]) / dir[a];
        double t2 = (mx - origin[a]) / dir[a];
        if (t1 > t2) std::swap(t1, t2);
        lo = std::max(lo, t1);
        hi = std::min(hi, t2);
        if (lo > hi) return std::numeric_limits<double>::infinity();
    }
    return lo;
}

}  // namespace detail

// Renders one scan in the sensor frame. Points are exact ray-surface hits unless
// point_sigma is nonzero; dropped instances are skipped entirely.
inline LabeledPointCloud render_scan(const World& world, const PoseSE3& sensor,
                                     const RenderParams& rp, double point_sigma = 0.0,
                                     const std::set<std::uint32_t>& dropped = {},
                                     std::uint64_t noise_seed = 0) {
    LabeledPointCloud cloud;
    Rng rng = make_rng(derive_seed(noise_seed, 0x9e11));
    std::normal_distribution<double> jitter(0.0, point_sigma);
    const Eigen::Vector3d origin = sensor.translation;
    for (int r = 0; r < rp.rings; ++r) {
        const double elev = rp.rings == 1
                                ? rp.elevation_min
                                : rp.elevation_min + (rp.elevation_max - rp.elevation_min) *
                                                         static_cast<double>(r) /
                                                         static_cast<double>(rp.rings - 1);
        for (int a = 0; a < rp.azimuth_steps; ++a) {
            const double az = 2.0 * M_PI * static_cast<double>(a) /
                              static_cast<double>(rp.azimuth_steps);
            const Eigen::Vector3d dir_sensor(std::cos(elev) * std::cos(az),
                                             std::cos(elev) * std::sin(az), std::sin(elev));
            const Eigen::Vector3d dir_world = sensor.rotation * dir_sensor;
            double best_t = std::numeric_limits<double>::infinity();
            const Primitive* best = nullptr;
            for (const auto& prim : world) {
                if (dropped.count(prim.instance_id)) continue;
                const double t =
                    detail::ray_box(origin, dir_world, prim, rp.min_range, rp.max_range);
                if (t < best_t) {
                    best_t = t;
                    best = &prim;
                }
            }
            if (!best) continue;
            Eigen::Vector3d p = dir_sensor * best_t;
            if (point_sigma > 0.0) {
                p += Eigen::Vector3d(jitter(rng), jitter(rng), jitter(rng));
            }
            cloud.push_back(p, static_cast<std::uint16_t>(best->cls), best->instance_id);
        }
    }
    return cloud;
}

// Random street-corner style layout around a local origin. Instance ids are
// allocated from the shared counter so ids stay globally unique.
inline World make_place(Rng& rng, const Eigen::Vector3d& origin, std::uint32_t& next_instance) {
    World world;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto range = [&rng, &u01](double lo, double hi) {
        return lo + (hi - lo) * u01(rng);
    };
    auto count = [&rng](int lo, int hi) {
        std::uniform_int_distribution<int> d(lo, hi);
        return d(rng);
    };
    auto place_at = [&](double radius_lo, double radius_hi) -> Eigen::Vector3d {
        const double ang = range(0, 2.0 * M_PI);
        const double rad = range(radius_lo, radius_hi);
        return origin + Eigen::Vector3d(rad * std::cos(ang), rad * std::sin(ang), 0.0);
    };
    auto add = [&](int cls, const Eigen::Vector3d& base, const Eigen::Vector3d& half,
                   double z_center) {
        Primitive p;
        p.cls = cls;
        p.instance_id = next_instance++;
        p.center = base + Eigen::Vector3d(0, 0, z_center);
        p.half = half;
        world.push_back(p);
    };

    add(cls::kTerrain, origin, Eigen::Vector3d(50, 50, 0.05), -0.05);  // ground slab

    const int buildings = count(2, 4);
    for (int i = 0; i < buildings; ++i) {
        const Eigen::Vector3d half(range(3, 8), range(3, 8), range(3, 6));
        add(cls::kBuilding, place_at(14, 30), half, half.z());
    }
    const int poles = count(3, 7);
    for (int i = 0; i < poles; ++i) {
        const double h = range(2, 3.5);
        add(cls::kPole, place_at(4, 18), Eigen::Vector3d(0.15, 0.15, h), h);
    }
    const int signs = count(1, 3);
    for (int i = 0; i < signs; ++i) {
        add(cls::kTrafficSign, place_at(4, 14), Eigen::Vector3d(0.4, 0.08, 0.4), range(2, 3));
    }
    const int trunks = count(2, 5);
    for (int i = 0; i < trunks; ++i) {
        const Eigen::Vector3d base = place_at(6, 24);
        const double h = range(1.5, 2.5);
        add(cls::kTrunk, base, Eigen::Vector3d(0.25, 0.25, h), h);
        add(cls::kVegetation, base, Eigen::Vector3d(range(1, 2.5), range(1, 2.5), range(0.8, 1.6)),
            2 * h + 0.8);
    }
    const int cars = count(1, 3);
    for (int i = 0; i < cars; ++i) {
        add(cls::kCar, place_at(4, 14), Eigen::Vector3d(2.0, 0.9, 0.75), 0.75);
    }
    const int fences = count(0, 2);
    for (int i = 0; i < fences; ++i) {
        add(cls::kFence, place_at(8, 24), Eigen::Vector3d(range(3, 7), 0.1, 0.6), 0.6);
    }
    return world;
}

struct Scenes {
    std::vector<LabeledPointCloud> scans;
    std::vector<PoseSE3> poses;  // sensor-to-world
    std::vector<ScanPair> pairs;
    std::vector<int> place_of_scan;
};

// Labeled scenes for classifier training. Each place is rendered once; a seeded
// subset is revisited from a perturbed viewpoint. Pair labels are exact by
// construction and consistent with the 3 m / 20 m distance rule because place
// origins sit on a 120 m grid while revisits stay within the jitter radius.
inline Scenes synth_scenes(std::uint64_t seed, int n_places, double revisit_fraction,
                           const NoiseParams& noise, const RenderParams& rp = {},
                           const std::string& seq_id = "synthetic") {
    if (n_places < 2) throw DataError("synth_scenes requires at least two places");
    Rng rng = make_rng(derive_seed(seed, 0x5ce2));
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    Scenes out;
    std::uint32_t next_instance = 1;
    std::vector<World> worlds;
    const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_places))));
    for (int p = 0; p < n_places; ++p) {
        const Eigen::Vector3d origin(120.0 * (p % grid), 120.0 * (p / grid), 0.0);
        worlds.push_back(make_place(rng, origin, next_instance));
        PoseSE3 pose = PoseSE3::from_yaw(
            u01(rng) * 2.0 * M_PI, origin + Eigen::Vector3d(0, 0, rp.sensor_height));
        out.poses.push_back(pose);
        out.scans.push_back(render_scan(worlds.back(), pose, rp, noise.point_sigma, {},
                                        derive_seed(seed, 1000 + p)));
        out.place_of_scan.push_back(p);
    }

    const int n_revisits = static_cast<int>(std::llround(revisit_fraction * n_places));
    std::vector<int> revisit_places(static_cast<std::size_t>(n_places));
    std::iota(revisit_places.begin(), revisit_places.end(), 0);
    std::shuffle(revisit_places.begin(), revisit_places.end(), rng);
    revisit_places.resize(static_cast<std::size_t>(std::min(n_revisits, n_places)));
    std::sort(revisit_places.begin(), revisit_places.end());

    std::vector<std::pair<int, int>> positive_pairs;  // (first visit, revisit)
    for (int p : revisit_places) {
        const PoseSE3& base = out.poses[static_cast<std::size_t>(p)];
        const double dyaw = (2.0 * u01(rng) - 1.0) * noise.yaw_jitter;
        const Eigen::Vector3d dt((2.0 * u01(rng) - 1.0) * noise.trans_jitter,
                                 (2.0 * u01(rng) - 1.0) * noise.trans_jitter, 0.0);
        // Composed so that zero jitter reproduces the base pose bit-exactly.
        PoseSE3 pose;
        pose.rotation = PoseSE3::from_yaw(dyaw).rotation * base.rotation;
        pose.translation = base.translation + dt;
        std::set<std::uint32_t> dropped;
        for (const auto& prim : worlds[static_cast<std::size_t>(p)]) {
            if (prim.cls != cls::kTerrain && u01(rng) < noise.instance_dropout) {
                dropped.insert(prim.instance_id);
            }
        }
        const int idx = static_cast<int>(out.scans.size());
        out.poses.push_back(pose);
        out.scans.push_back(render_scan(worlds[static_cast<std::size_t>(p)], pose, rp,
                                        noise.point_sigma, dropped,
                                        derive_seed(seed, 2000 + p)));
        out.place_of_scan.push_back(p);
        positive_pairs.emplace_back(p, idx);
    }

    for (const auto& [a, b] : positive_pairs) out.pairs.push_back({seq_id, a, b, 1});
    // Matching count of cross-place negatives (or a baseline batch of negatives
    // when nothing was revisited).
    const int total = static_cast<int>(out.scans.size());
    std::uniform_int_distribution<int> pick(0, total - 1);
    std::size_t want_neg = positive_pairs.empty() ? static_cast<std::size_t>(n_places)
                                                  : positive_pairs.size();
    std::set<std::pair<int, int>> used;
    std::size_t guard = 0;
    while (used.size() < want_neg && guard < 100000) {
        ++guard;
        int a = pick(rng);
        int b = pick(rng);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        if (out.place_of_scan[static_cast<std::size_t>(a)] ==
            out.place_of_scan[static_cast<std::size_t>(b)]) {
            continue;
        }
        used.insert({a, b});
    }
    for (const auto& [a, b] : used) out.pairs.push_back({seq_id, a, b, 0});
    return out;
}

struct Sequence {
    std::vector<LabeledPointCloud> scans;
    std::vector<PoseSE3> gt_poses;
    std::vector<PoseSE3> odom_poses;  // drifted odometry chain
    World world;
};

struct SquareOptions {
    double side = 40.0;
    double step = 10.0;
    double yaw_drift_per_step = 0.006;   // rad, systematic odometry error
    double trans_drift_per_step = 0.05;  // m, along-track bias
};

// Square route lined with structure; the final scan revisits the start, which is
// the one true loop. Odometry carries a systematic drift so the chain endpoint
// misses ground truth until the loop constraint pulls it back.
inline Sequence make_square_sequence(std::uint64_t seed, const SquareOptions& opts = {},
                                     const RenderParams& rp = {}) {
    Sequence seq;
    Rng rng = make_rng(derive_seed(seed, 0x50aa));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uint32_t next_instance = 1;

    auto add = [&](int cls, const Eigen::Vector3d& center, const Eigen::Vector3d& half) {
        Primitive p;
        p.cls = cls;
        p.instance_id = next_instance++;
        p.center = center;
        p.half = half;
        seq.world.push_back(p);
    };
    const double margin = 30.0;
    add(cls::kTerrain,
        Eigen::Vector3d(opts.side / 2, opts.side / 2, -0.05),
        Eigen::Vector3d(opts.side / 2 + margin, opts.side / 2 + margin, 0.05));

    // Structure along each leg: alternating poles, trunks, signs and buildings on
    // both sides of the route.
    const auto corners = std::vector<Eigen::Vector3d>{
        {0, 0, 0}, {opts.side, 0, 0}, {opts.side, opts.side, 0}, {0, opts.side, 0}};
    for (int leg = 0; leg < 4; ++leg) {
        const Eigen::Vector3d a = corners[static_cast<std::size_t>(leg)];
        const Eigen::Vector3d b = corners[static_cast<std::size_t>((leg + 1) % 4)];
        const Eigen::Vector3d dir = (b - a).normalized();
        const Eigen::Vector3d lateral(-dir.y(), dir.x(), 0.0);
        const int slots = static_cast<int>(opts.side / 8.0);
        for (int s = 0; s <= slots; ++s) {
            const Eigen::Vector3d at = a + dir * (8.0 * s);
            for (double side_sign : {-1.0, 1.0}) {
                const double offset = 5.0 + 6.0 * u01(rng);
                const Eigen::Vector3d base = at + lateral * (side_sign * offset);
                const double roll = u01(rng);
                if (roll < 0.35) {
                    const double h = 2.0 + 1.5 * u01(rng);
                    add(cls::kPole, base + Eigen::Vector3d(0, 0, h),
                        Eigen::Vector3d(0.15, 0.15, h));
                } else if (roll < 0.55) {
                    const double h = 1.5 + u01(rng);
                    add(cls::kTrunk, base + Eigen::Vector3d(0, 0, h),
                        Eigen::Vector3d(0.25, 0.25, h));
                } else if (roll < 0.7) {
                    add(cls::kTrafficSign, base + Eigen::Vector3d(0, 0, 2.2 + u01(rng)),
                        Eigen::Vector3d(0.4, 0.08, 0.4));
                } else {
                    const Eigen::Vector3d half(2.5 + 3.0 * u01(rng), 2.5 + 3.0 * u01(rng),
                                               3.0 + 2.0 * u01(rng));
                    add(cls::kBuilding, base + lateral * (side_sign * half.norm() * 0.4) +
                                            Eigen::Vector3d(0, 0, half.z()),
                        half);
                }
            }
        }
    }

    // Waypoints around the square plus the closing revisit of the start.
    std::vector<PoseSE3> route;
    for (int leg = 0; leg < 4; ++leg) {
        const Eigen::Vector3d a = corners[static_cast<std::size_t>(leg)];
        const Eigen::Vector3d b = corners[static_cast<std::size_t>((leg + 1) % 4)];
        const Eigen::Vector3d dir = (b - a).normalized();
        const double yaw = std::atan2(dir.y(), dir.x());
        for (double s = 0.0; s < opts.side - 1e-9; s += opts.step) {
            route.push_back(PoseSE3::from_yaw(
                yaw, a + dir * s + Eigen::Vector3d(0, 0, rp.sensor_height)));
        }
    }
    route.push_back(PoseSE3::from_yaw(route.front().yaw(), route.front().translation));

    seq.gt_poses = route;
    for (std::size_t i = 0; i < route.size(); ++i) {
        seq.scans.push_back(
            render_scan(seq.world, route[i], rp, 0.0, {}, derive_seed(seed, 3000 + i)));
    }

    // Drifted odometry: exact relative motions composed with a systematic error.
    seq.odom_poses.push_back(route.front());
    for (std::size_t i = 1; i < route.size(); ++i) {
        PoseSE3 rel = route[i - 1].inverse() * route[i];
        PoseSE3 drift = PoseSE3::from_yaw(opts.yaw_drift_per_step,
                                          Eigen::Vector3d(opts.trans_drift_per_step, 0, 0));
        seq.odom_poses.push_back(seq.odom_poses.back() * (rel * drift));
    }
    return seq;
}

// SemanticKITTI-layout dataset: <root>/<seq>/velodyne, <root>/<seq>/labels,
// poses.txt (ground truth) and odometry.txt (drifted chain, when provided).
inline void write_dataset(const std::filesystem::path& root, const std::string& seq,
                          const std::vector<LabeledPointCloud>& scans,
                          const std::vector<PoseSE3>& gt_poses,
                          const std::vector<PoseSE3>& odom_poses = {}) {
    namespace fs = std::filesystem;
    fs::create_directories(root / seq / "velodyne");
    fs::create_directories(root / seq / "labels");
    for (std::size_t i = 0; i < scans.size(); ++i) {
        write_scan(scans[i], scan_bin_path(root, seq, static_cast<int>(i)).string(),
                   scan_label_path(root, seq, static_cast<int>(i)).string());
    }
    write_poses(gt_poses, (root / seq / "poses.txt").string());
    if (!odom_poses.empty()) {
        write_poses(odom_poses, (root / seq / "odometry.txt").string());
    }
}

}  // namespace sgloop::synth
