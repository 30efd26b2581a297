#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sgloop/common.hpp"

namespace sgloop {

// One scan: per-point position, semantic class and instance id (0 = no instance).
struct LabeledPointCloud {
    std::vector<Eigen::Vector3d> points;
    std::vector<std::uint16_t> semantic;
    std::vector<std::uint32_t> instance;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    void reserve(std::size_t n) {
        points.reserve(n);
        semantic.reserve(n);
        instance.reserve(n);
    }

    void push_back(const Eigen::Vector3d& p, std::uint16_t sem, std::uint32_t inst) {
        points.push_back(p);
        semantic.push_back(sem);
        instance.push_back(inst);
    }

    // Invariant: the three arrays are parallel and coordinates are finite.
    void validate() const {
        if (semantic.size() != points.size() || instance.size() != points.size()) {
            throw DataError("LabeledPointCloud arrays have mismatched lengths");
        }
        for (const auto& p : points) {
            if (!p.allFinite()) throw DataError("LabeledPointCloud contains non-finite coordinates");
        }
    }
};

}  // namespace sgloop
