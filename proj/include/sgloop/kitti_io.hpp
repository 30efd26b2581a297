#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "sgloop/common.hpp"
#include "sgloop/geometry.hpp"
#include "sgloop/point_cloud.hpp"

namespace sgloop {

// SemanticKITTI on-disk convention:
//   <seq>/velodyne/NNNNNN.bin   flat float32 (x, y, z, intensity) per point
//   <seq>/labels/NNNNNN.label   uint32 per point, low 16 bits semantic, high 16 instance
//   <seq>/poses.txt             one 3x4 row-major pose per line

inline LabeledPointCloud read_scan(const std::string& bin_path, const std::string& label_path) {
    std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
    if (!bin) throw DataError("cannot open scan file: " + bin_path);
    const auto bin_bytes = static_cast<std::size_t>(bin.tellg());
    if (bin_bytes % 16 != 0) {
        throw DataError("scan file size is not a multiple of 16 bytes: " + bin_path);
    }
    const std::size_t n = bin_bytes / 16;

    std::ifstream lab(label_path, std::ios::binary | std::ios::ate);
    if (!lab) throw DataError("cannot open label file: " + label_path);
    const auto lab_bytes = static_cast<std::size_t>(lab.tellg());
    if (lab_bytes != n * 4) {
        throw DataError("label count does not match point count: " + label_path);
    }

    bin.seekg(0);
    lab.seekg(0);
    LabeledPointCloud cloud;
    cloud.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        float xyzi[4];
        bin.read(reinterpret_cast<char*>(xyzi), sizeof(xyzi));
        std::uint32_t word = 0;
        lab.read(reinterpret_cast<char*>(&word), sizeof(word));
        if (!bin || !lab) throw DataError("truncated scan/label pair: " + bin_path);
        cloud.push_back(Eigen::Vector3d(xyzi[0], xyzi[1], xyzi[2]),
                        static_cast<std::uint16_t>(word & 0xffffu),
                        word >> 16);
    }
    return cloud;
}

inline void write_scan(const LabeledPointCloud& cloud, const std::string& bin_path,
                       const std::string& label_path) {
    cloud.validate();
    std::ofstream bin(bin_path, std::ios::binary);
    std::ofstream lab(label_path, std::ios::binary);
    if (!bin || !lab) throw DataError("cannot open output scan files for " + bin_path);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const float xyzi[4] = {static_cast<float>(cloud.points[i].x()),
                               static_cast<float>(cloud.points[i].y()),
                               static_cast<float>(cloud.points[i].z()), 0.0f};
        bin.write(reinterpret_cast<const char*>(xyzi), sizeof(xyzi));
        const std::uint32_t word =
            (cloud.instance[i] << 16) | static_cast<std::uint32_t>(cloud.semantic[i] & 0xffffu);
        lab.write(reinterpret_cast<const char*>(&word), sizeof(word));
    }
}

inline std::vector<PoseSE3> read_poses(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open pose file: " + path);
    std::vector<PoseSE3> poses;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        double v[12];
        for (double& x : v) {
            if (!(ss >> x)) throw DataError("malformed pose line in " + path + ": " + line);
        }
        PoseSE3 p;
        p.rotation << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
        p.translation << v[3], v[7], v[11];
        poses.push_back(p);
    }
    return poses;
}

inline void write_poses(const std::vector<PoseSE3>& poses, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open pose file for writing: " + path);
    out << std::setprecision(12);
    for (const auto& p : poses) {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 4; ++c) {
                const double v = c < 3 ? p.rotation(r, c) : p.translation(r);
                out << v;
                if (!(r == 2 && c == 3)) out << ' ';
            }
        }
        out << '\n';
    }
}

inline std::string scan_id(int index) {
    std::ostringstream ss;
    ss << std::setw(6) << std::setfill('0') << index;
    return ss.str();
}

inline std::filesystem::path scan_bin_path(const std::filesystem::path& root,
                                           const std::string& seq, int index) {
    return root / seq / "velodyne" / (scan_id(index) + ".bin");
}

inline std::filesystem::path scan_label_path(const std::filesystem::path& root,
                                             const std::string& seq, int index) {
    return root / seq / "labels" / (scan_id(index) + ".label");
}

}  // namespace sgloop
