#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgloop/common.hpp"
#include "sgloop/point_cloud.hpp"

namespace sgloop {

// Target ids of the 12-class SemanticKITTI remap. The synthetic generator reuses
// the same vocabulary so every downstream path is identical for real and synthetic data.
namespace cls {
inline constexpr int kCar = 0;
inline constexpr int kOtherVehicle = 1;
inline constexpr int kOtherGround = 2;
inline constexpr int kFence = 3;
inline constexpr int kTrunk = 4;
inline constexpr int kPole = 5;
inline constexpr int kTruck = 6;
inline constexpr int kSidewalk = 7;
inline constexpr int kBuilding = 8;
inline constexpr int kVegetation = 9;
inline constexpr int kTerrain = 10;
inline constexpr int kTrafficSign = 11;
inline constexpr int kSemanticKittiClasses = 12;
}  // namespace cls

// Source-class -> target-class remap. Source ids absent from the table are ignored
// and their points dropped, so graph nodes never carry classes the model never sees.
struct ClassMap {
    std::unordered_map<std::uint16_t, int> map;
    int num_classes = 0;

    static constexpr int kIgnore = -1;

    int remap_of(std::uint16_t source) const {
        auto it = map.find(source);
        return it == map.end() ? kIgnore : it->second;
    }

    static ClassMap identity(int c) {
        ClassMap m;
        m.num_classes = c;
        for (int i = 0; i < c; ++i) m.map[static_cast<std::uint16_t>(i)] = i;
        return m;
    }

    // Default SemanticKITTI remap of the raw label ids into 12 classes
    // (car, other vehicles, other ground, fence, trunk, pole, truck, sidewalk,
    // building, vegetation, terrain, traffic sign). Moving variants fold into
    // their static class. Road/parking/person/outlier ids are ignored.
    static ClassMap semantic_kitti() {
        ClassMap m;
        m.num_classes = cls::kSemanticKittiClasses;
        auto put = [&m](std::initializer_list<int> sources, int target) {
            for (int s : sources) m.map[static_cast<std::uint16_t>(s)] = target;
        };
        put({10, 252}, cls::kCar);
        put({11, 13, 15, 16, 20, 253, 255, 256, 257, 259}, cls::kOtherVehicle);
        put({49}, cls::kOtherGround);
        put({51}, cls::kFence);
        put({71}, cls::kTrunk);
        put({80}, cls::kPole);
        put({18, 258}, cls::kTruck);
        put({48}, cls::kSidewalk);
        put({50}, cls::kBuilding);
        put({70}, cls::kVegetation);
        put({72}, cls::kTerrain);
        put({81}, cls::kTrafficSign);
        return m;
    }

    // Default KITTI-360 remap into 13 classes (car, static object, ground, parking,
    // rail track, building, wall, fence, guard rail, bridge, pole, vegetation,
    // traffic sign), keyed by the Cityscapes-style label ids KITTI-360 uses.
    static ClassMap kitti360() {
        ClassMap m;
        m.num_classes = 13;
        auto put = [&m](std::initializer_list<int> sources, int target) {
            for (int s : sources) m.map[static_cast<std::uint16_t>(s)] = target;
        };
        put({26}, 0);            // car
        put({36, 37, 38, 39, 40, 41}, 1);  // static objects (boxes, trash bins, ...)
        put({6, 22}, 2);         // ground / terrain
        put({9}, 3);             // parking
        put({10}, 4);            // rail track
        put({11}, 5);            // building
        put({12}, 6);            // wall
        put({13}, 7);            // fence
        put({14}, 8);            // guard rail
        put({15}, 9);            // bridge
        put({17}, 10);           // pole
        put({21}, 11);           // vegetation
        put({20}, 12);           // traffic sign
        return m;
    }

    static ClassMap from_json(const nlohmann::json& j) {
        ClassMap m;
        if (!j.contains("num_classes") || !j.contains("map")) {
            throw DataError("class map json requires 'num_classes' and 'map'");
        }
        m.num_classes = j.at("num_classes").get<int>();
        for (const auto& [key, value] : j.at("map").items()) {
            const int target = value.get<int>();
            if (target < 0 || target >= m.num_classes) {
                throw DataError("class map target out of range for key " + key);
            }
            m.map[static_cast<std::uint16_t>(std::stoi(key))] = target;
        }
        return m;
    }
};

struct RemapResult {
    LabeledPointCloud cloud;
    std::size_t dropped = 0;
};

// Ignored classes drop their points; dropping is silent but the count is reported.
inline RemapResult remap(const LabeledPointCloud& in, const ClassMap& class_map) {
    RemapResult out;
    out.cloud.reserve(in.size());
    for (std::size_t idx = 0; idx < in.size(); ++idx) {
        const int target = class_map.remap_of(in.semantic[idx]);
        if (target == ClassMap::kIgnore) {
            ++out.dropped;
            continue;
        }
        out.cloud.push_back(in.points[idx], static_cast<std::uint16_t>(target), in.instance[idx]);
    }
    return out;
}

}  // namespace sgloop
