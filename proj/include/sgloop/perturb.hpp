#pragma once

#include <Eigen/Geometry>
#include <cmath>
#include <string>

#include "sgloop/common.hpp"
#include "sgloop/point_cloud.hpp"

namespace sgloop {

enum class PerturbKind { none, rotate, occlude, both };

inline PerturbKind parse_perturb(const std::string& s) {
    if (s == "none") return PerturbKind::none;
    if (s == "rotate") return PerturbKind::rotate;
    if (s == "occlude") return PerturbKind::occlude;
    if (s == "both") return PerturbKind::both;
    throw DataError("unknown perturbation '" + s + "' (expected none|rotate|occlude|both)");
}

inline std::string perturb_name(PerturbKind k) {
    switch (k) {
        case PerturbKind::none: return "none";
        case PerturbKind::rotate: return "rotate";
        case PerturbKind::occlude: return "occlude";
        case PerturbKind::both: return "both";
    }
    return "none";
}

inline constexpr double kMaxPerturbYaw = M_PI / 6.0;      // +-30 degrees
inline constexpr double kOcclusionWedge = M_PI / 6.0;     // 30 degree field of view

// Rigid yaw rotation about the sensor z-axis, angle uniform in +-30 degrees.
inline LabeledPointCloud perturb_rotation(const LabeledPointCloud& cloud, std::uint64_t seed,
                                          double* applied_yaw = nullptr) {
    Rng rng = make_rng(derive_seed(seed, 0x0707));
    std::uniform_real_distribution<double> dist(-kMaxPerturbYaw, kMaxPerturbYaw);
    const double yaw = dist(rng);
    if (applied_yaw) *applied_yaw = yaw;
    const Eigen::Matrix3d r = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    LabeledPointCloud out = cloud;
    for (auto& p : out.points) p = r * p;
    return out;
}

struct OcclusionWedge {
    double start = 0.0;  // rad, in [0, 2pi)
    double width = kOcclusionWedge;
};

// Removes every point whose azimuth falls in a uniformly random 30 degree wedge.
inline LabeledPointCloud perturb_occlusion(const LabeledPointCloud& cloud, std::uint64_t seed,
                                           OcclusionWedge* applied = nullptr) {
    Rng rng = make_rng(derive_seed(seed, 0x0cc1));
    std::uniform_real_distribution<double> dist(0.0, 2.0 * M_PI);
    OcclusionWedge wedge;
    wedge.start = dist(rng);
    if (applied) *applied = wedge;
    LabeledPointCloud out;
    out.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        double az = std::atan2(cloud.points[i].y(), cloud.points[i].x());
        if (az < 0) az += 2.0 * M_PI;
        double rel = az - wedge.start;
        if (rel < 0) rel += 2.0 * M_PI;
        if (rel < wedge.width) continue;
        out.push_back(cloud.points[i], cloud.semantic[i], cloud.instance[i]);
    }
    return out;
}

// both = rotate, then occlude.
inline LabeledPointCloud perturb(const LabeledPointCloud& cloud, PerturbKind kind,
                                 std::uint64_t seed) {
    switch (kind) {
        case PerturbKind::none: return cloud;
        case PerturbKind::rotate: return perturb_rotation(cloud, derive_seed(seed, 1));
        case PerturbKind::occlude: return perturb_occlusion(cloud, derive_seed(seed, 2));
        case PerturbKind::both:
            return perturb_occlusion(perturb_rotation(cloud, derive_seed(seed, 1)),
                                     derive_seed(seed, 2));
    }
    return cloud;
}

}  // namespace sgloop
