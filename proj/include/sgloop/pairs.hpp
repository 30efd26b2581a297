#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgloop/common.hpp"

namespace sgloop {

// A labeled scan pair: label 1 = same place, 0 = different place.
struct ScanPair {
    std::string seq_id;
    int i = 0;
    int j = 0;
    int label = 0;
};

struct PairSet {
    std::vector<ScanPair> pairs;
    bool insufficient = false;  // fewer candidates than requested
    double d_pos = 3.0;
    double d_neg = 20.0;
    std::uint64_t seed = 0;
};

// Labels are a pure function of pose distance: < d_pos positive, > d_neg negative,
// the band [d_pos, d_neg] is never emitted. Sampling is balanced and reproducible.
inline PairSet generate_pairs(const std::vector<Eigen::Vector3d>& positions, double d_pos,
                              double d_neg, std::size_t count, std::uint64_t seed,
                              const std::string& seq_id = "synthetic") {
    if (d_pos >= d_neg) throw DataError("generate_pairs requires d_pos < d_neg");
    const std::size_t n = positions.size();
    const std::size_t want_pos = count / 2;
    const std::size_t want_neg = count - want_pos;

    // Reservoir sampling per bucket keeps memory independent of the candidate count.
    struct Reservoir {
        std::vector<std::pair<int, int>> slots;
        std::size_t capacity = 0;
        std::size_t seen = 0;
        void offer(int a, int b, Rng& rng) {
            ++seen;
            if (slots.size() < capacity) {
                slots.emplace_back(a, b);
            } else if (capacity > 0) {
                std::uniform_int_distribution<std::size_t> pick(0, seen - 1);
                const std::size_t r = pick(rng);
                if (r < capacity) slots[r] = {a, b};
            }
        }
    };
    Rng rng = make_rng(derive_seed(seed, 0x70a1));
    Reservoir pos, neg;
    pos.capacity = want_pos;
    neg.capacity = want_neg;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const double d = (positions[a] - positions[b]).norm();
            if (d < d_pos) {
                pos.offer(static_cast<int>(a), static_cast<int>(b), rng);
            } else if (d > d_neg) {
                neg.offer(static_cast<int>(a), static_cast<int>(b), rng);
            }
        }
    }

    PairSet out;
    out.d_pos = d_pos;
    out.d_neg = d_neg;
    out.seed = seed;
    out.insufficient = pos.slots.size() < want_pos || neg.slots.size() < want_neg;
    for (const auto& [a, b] : pos.slots) out.pairs.push_back({seq_id, a, b, 1});
    for (const auto& [a, b] : neg.slots) out.pairs.push_back({seq_id, a, b, 0});
    std::shuffle(out.pairs.begin(), out.pairs.end(), rng);
    return out;
}

inline nlohmann::json pairs_to_json(const PairSet& set, const std::string& config_hash) {
    nlohmann::json j;
    j["version"] = 1;
    j["config_hash"] = config_hash;
    j["d_pos"] = set.d_pos;
    j["d_neg"] = set.d_neg;
    j["seed"] = set.seed;
    j["insufficient"] = set.insufficient;
    auto arr = nlohmann::json::array();
    for (const auto& p : set.pairs) {
        arr.push_back({{"seq", p.seq_id}, {"i", p.i}, {"j", p.j}, {"label", p.label}});
    }
    j["pairs"] = arr;
    return j;
}

inline PairSet pairs_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j.at("version").get<int>() != 1) {
        throw DataError("unsupported pairs file version");
    }
    PairSet set;
    set.d_pos = j.value("d_pos", 3.0);
    set.d_neg = j.value("d_neg", 20.0);
    set.seed = j.value("seed", std::uint64_t{0});
    set.insufficient = j.value("insufficient", false);
    for (const auto& e : j.at("pairs")) {
        ScanPair p;
        p.seq_id = e.at("seq").get<std::string>();
        p.i = e.at("i").get<int>();
        p.j = e.at("j").get<int>();
        p.label = e.at("label").get<int>();
        if (p.i == p.j || (p.label != 0 && p.label != 1)) throw DataError("invalid scan pair entry");
        set.pairs.push_back(std::move(p));
    }
    return set;
}

inline void save_pairs(const PairSet& set, const std::string& path,
                       const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open pairs file for writing: " + path);
    out << pairs_to_json(set, config_hash).dump(2) << '\n';
}

inline PairSet load_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open pairs file: " + path);
    nlohmann::json j;
    in >> j;
    return pairs_from_json(j);
}

}  // namespace sgloop
