#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgloop/common.hpp"
#include "sgloop/model.hpp"
#include "sgloop/params.hpp"

namespace sgloop {

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double val_max_f1 = 0.0;
    double seconds = 0.0;
};

// Checkpoint embeds the full architecture config so evaluation can never run a
// mismatched model; parameters are stored bit-exactly as raw doubles.
struct Checkpoint {
    ModelConfig model_config;
    ParamDict params;
    nlohmann::json train_config;  // recipe + config hash, free-form block
    std::vector<EpochStats> history;
    double decision_threshold = 0.5;

    PlaceModel model() const { return PlaceModel{model_config, params}; }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    namespace fs = std::filesystem;
    const fs::path tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot open checkpoint for writing: " + path);
        out.write("SGCK", 4);
        io::write_pod<std::uint32_t>(out, kCheckpointVersion);

        nlohmann::json header;
        header["model"] = ck.model_config.to_json();
        header["train"] = ck.train_config;
        header["decision_threshold"] = ck.decision_threshold;
        auto hist = nlohmann::json::array();
        for (const auto& h : ck.history) {
            hist.push_back({{"epoch", h.epoch},
                            {"loss", h.loss},
                            {"val_max_f1", h.val_max_f1},
                            {"seconds", h.seconds}});
        }
        header["history"] = hist;
        io::write_string(out, header.dump());

        io::write_pod<std::uint64_t>(out, ck.params.size());
        for (const auto& [name, m] : ck.params) {
            io::write_string(out, name);
            io::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
            io::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                for (Eigen::Index c = 0; c < m.cols(); ++c) io::write_pod<double>(out, m(r, c));
            }
        }
        if (!out) throw DataError("failed writing checkpoint: " + path);
    }
    fs::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "SGCK") throw DataError("bad checkpoint magic: " + path);
    const auto version = io::read_pod<std::uint32_t>(in, "checkpoint version");
    if (version != kCheckpointVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    }

    Checkpoint ck;
    const nlohmann::json header = nlohmann::json::parse(io::read_string(in, "checkpoint header"));
    ck.model_config = ModelConfig::from_json(header.at("model"));
    ck.train_config = header.value("train", nlohmann::json::object());
    ck.decision_threshold = header.value("decision_threshold", 0.5);
    for (const auto& h : header.value("history", nlohmann::json::array())) {
        ck.history.push_back({h.value("epoch", 0), h.value("loss", 0.0),
                              h.value("val_max_f1", 0.0), h.value("seconds", 0.0)});
    }

    const auto n_params = io::read_pod<std::uint64_t>(in, "checkpoint parameter count");
    for (std::uint64_t i = 0; i < n_params; ++i) {
        const std::string name = io::read_string(in, "parameter name");
        const auto rows = io::read_pod<std::uint64_t>(in, "parameter rows");
        const auto cols = io::read_pod<std::uint64_t>(in, "parameter cols");
        ad::Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = io::read_pod<double>(in, "parameter data");
            }
        }
        ck.params.emplace(name, std::move(m));
    }

    // Architecture integrity: stored arrays must match the embedded config exactly.
    const auto shapes = param_shapes(ck.model_config);
    if (shapes.size() != ck.params.size()) {
        throw DataError("checkpoint parameter set does not match its embedded config");
    }
    for (const auto& [name, shape] : shapes) {
        auto it = ck.params.find(name);
        if (it == ck.params.end() || it->second.rows() != shape.first ||
            it->second.cols() != shape.second) {
            throw DataError("checkpoint architecture mismatch on parameter " + name);
        }
    }
    return ck;
}

}  // namespace sgloop
