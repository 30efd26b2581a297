#pragma once

#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "sgloop/common.hpp"
#include "sgloop/registration.hpp"
#include "sgloop/semantic_graph.hpp"
#include "sgloop/synth.hpp"
#include "sgloop/trainer.hpp"

namespace sgloop {

// Declarative tool configuration: one file with nested sections. Unknown keys
// are rejected outright; command-line flags override file values.
struct AppConfig {
    TrainConfig train;                 // includes the model section
    GraphBuildOptions graph;
    synth::NoiseParams noise;
    synth::RenderParams render;
    RegistrationConfig registration;
    double pair_d_pos = 3.0;
    double pair_d_neg = 20.0;
    int pair_count = 200;
    int synth_places = 24;
    double synth_revisit_fraction = 0.5;
    int loop_keyframe_stride = 5;
    int loop_min_separation = 3;
    double loop_threshold = -1.0;  // < 0 = use the checkpoint's stored threshold
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["seed"] = seed;
        j["model"] = train.model.to_json();
        j["train"] = {{"learning_rate", train.learning_rate},
                      {"batch_size", train.batch_size},
                      {"epochs", train.epochs},
                      {"weight_decay", train.weight_decay},
                      {"beta1", train.beta1},
                      {"beta2", train.beta2},
                      {"val_fraction", train.val_fraction}};
        j["graph"] = {{"max_nodes", graph.max_nodes},
                      {"min_points", graph.min_points},
                      {"cluster_voxel", graph.cluster_voxel},
                      {"random_subsample", graph.random_subsample}};
        j["pairs"] = {{"d_pos", pair_d_pos}, {"d_neg", pair_d_neg}, {"count", pair_count}};
        j["synth"] = {{"places", synth_places},
                      {"revisit_fraction", synth_revisit_fraction},
                      {"yaw_jitter", noise.yaw_jitter},
                      {"trans_jitter", noise.trans_jitter},
                      {"point_sigma", noise.point_sigma},
                      {"instance_dropout", noise.instance_dropout},
                      {"rings", render.rings},
                      {"azimuth_steps", render.azimuth_steps},
                      {"max_range", render.max_range}};
        j["registration"] = {{"edge_threshold", registration.edge_threshold},
                             {"surface_threshold", registration.surface_threshold},
                             {"num_rings", registration.num_rings},
                             {"nn_count", registration.nn_count},
                             {"nn_max_radius", registration.nn_max_radius},
                             {"max_outer_iterations", registration.max_outer_iterations},
                             {"max_inner_iterations", registration.max_inner_iterations},
                             {"fitness_threshold", registration.fitness_threshold},
                             {"coarse_init", registration.coarse_init}};
        j["loop"] = {{"keyframe_stride", loop_keyframe_stride},
                     {"min_separation", loop_min_separation},
                     {"threshold", loop_threshold}};
        return j;
    }

    // Hash of the effective configuration, embedded in every output artifact.
    std::string config_hash() const { return to_hex(fnv1a64(to_json().dump())); }

    static AppConfig from_json(const nlohmann::json& j) {
        AppConfig c;
        validate_keys(j, "", {"seed", "model", "train", "graph", "pairs", "synth",
                              "registration", "loop"});
        c.seed = j.value("seed", c.seed);
        if (j.contains("model")) {
            validate_keys(j.at("model"), "model.",
                          {"num_classes", "max_nodes", "embed_dim", "heads", "knn", "sim_dim",
                           "fc_hidden", "use_diff", "use_gat", "use_geo", "use_att"});
            c.train.model = ModelConfig::from_json(j.at("model"));
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            validate_keys(t, "train.",
                          {"learning_rate", "batch_size", "epochs", "weight_decay", "beta1",
                           "beta2", "val_fraction"});
            c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
            c.train.batch_size = t.value("batch_size", c.train.batch_size);
            c.train.epochs = t.value("epochs", c.train.epochs);
            c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
            c.train.beta1 = t.value("beta1", c.train.beta1);
            c.train.beta2 = t.value("beta2", c.train.beta2);
            c.train.val_fraction = t.value("val_fraction", c.train.val_fraction);
        }
        if (j.contains("graph")) {
            const auto& g = j.at("graph");
            validate_keys(g, "graph.",
                          {"max_nodes", "min_points", "cluster_voxel", "random_subsample"});
            c.graph.max_nodes = g.value("max_nodes", c.graph.max_nodes);
            c.graph.min_points = g.value("min_points", c.graph.min_points);
            c.graph.cluster_voxel = g.value("cluster_voxel", c.graph.cluster_voxel);
            c.graph.random_subsample = g.value("random_subsample", c.graph.random_subsample);
        }
        if (j.contains("pairs")) {
            const auto& p = j.at("pairs");
            validate_keys(p, "pairs.", {"d_pos", "d_neg", "count"});
            c.pair_d_pos = p.value("d_pos", c.pair_d_pos);
            c.pair_d_neg = p.value("d_neg", c.pair_d_neg);
            c.pair_count = p.value("count", c.pair_count);
        }
        if (j.contains("synth")) {
            const auto& s = j.at("synth");
            validate_keys(s, "synth.",
                          {"places", "revisit_fraction", "yaw_jitter", "trans_jitter",
                           "point_sigma", "instance_dropout", "rings", "azimuth_steps",
                           "max_range"});
            c.synth_places = s.value("places", c.synth_places);
            c.synth_revisit_fraction = s.value("revisit_fraction", c.synth_revisit_fraction);
            c.noise.yaw_jitter = s.value("yaw_jitter", c.noise.yaw_jitter);
            c.noise.trans_jitter = s.value("trans_jitter", c.noise.trans_jitter);
            c.noise.point_sigma = s.value("point_sigma", c.noise.point_sigma);
            c.noise.instance_dropout = s.value("instance_dropout", c.noise.instance_dropout);
            c.render.rings = s.value("rings", c.render.rings);
            c.render.azimuth_steps = s.value("azimuth_steps", c.render.azimuth_steps);
            c.render.max_range = s.value("max_range", c.render.max_range);
        }
        if (j.contains("registration")) {
            const auto& r = j.at("registration");
            validate_keys(r, "registration.",
                          {"edge_threshold", "surface_threshold", "num_rings", "nn_count",
                           "nn_max_radius", "max_outer_iterations", "max_inner_iterations",
                           "fitness_threshold", "coarse_init"});
            c.registration.edge_threshold = r.value("edge_threshold", c.registration.edge_threshold);
            c.registration.surface_threshold =
                r.value("surface_threshold", c.registration.surface_threshold);
            c.registration.num_rings = r.value("num_rings", c.registration.num_rings);
            c.registration.nn_count = r.value("nn_count", c.registration.nn_count);
            c.registration.nn_max_radius = r.value("nn_max_radius", c.registration.nn_max_radius);
            c.registration.max_outer_iterations =
                r.value("max_outer_iterations", c.registration.max_outer_iterations);
            c.registration.max_inner_iterations =
                r.value("max_inner_iterations", c.registration.max_inner_iterations);
            c.registration.fitness_threshold =
                r.value("fitness_threshold", c.registration.fitness_threshold);
            c.registration.coarse_init = r.value("coarse_init", c.registration.coarse_init);
        }
        if (j.contains("loop")) {
            const auto& l = j.at("loop");
            validate_keys(l, "loop.", {"keyframe_stride", "min_separation", "threshold"});
            c.loop_keyframe_stride = l.value("keyframe_stride", c.loop_keyframe_stride);
            c.loop_min_separation = l.value("min_separation", c.loop_min_separation);
            c.loop_threshold = l.value("threshold", c.loop_threshold);
        }
        return c;
    }

    static AppConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open config file: " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError("malformed config file " + path + ": " + e.what());
        }
        return from_json(j);
    }

private:
    static void validate_keys(const nlohmann::json& j, const std::string& prefix,
                              const std::set<std::string>& known) {
        if (!j.is_object()) throw DataError("config section '" + prefix + "' must be an object");
        for (const auto& [key, _] : j.items()) {
            if (!known.count(key)) {
                throw DataError("unknown config key '" + prefix + key + "'");
            }
        }
    }
};

}  // namespace sgloop
