// Command-line entry point: dataset synthesis, graph caching, pair generation,
// training, evaluation and the end-to-end loop-closure pipeline.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sgloop/app_config.hpp"
#include "sgloop/checkpoint.hpp"
#include "sgloop/class_map.hpp"
#include "sgloop/evaluator.hpp"
#include "sgloop/kitti_io.hpp"
#include "sgloop/model.hpp"
#include "sgloop/pairs.hpp"
#include "sgloop/perturb.hpp"
#include "sgloop/posegraph.hpp"
#include "sgloop/registration.hpp"
#include "sgloop/semantic_graph.hpp"
#include "sgloop/svg_plot.hpp"
#include "sgloop/synth.hpp"
#include "sgloop/trainer.hpp"

namespace fs = std::filesystem;
using namespace sgloop;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

AppConfig load_config(const std::string& path) {
    return path.empty() ? AppConfig{} : AppConfig::from_file(path);
}

std::vector<int> scan_indices(const fs::path& root, const std::string& seq) {
    const fs::path dir = root / seq / "velodyne";
    if (!fs::is_directory(dir)) throw DataError("no velodyne directory under " + dir.string());
    std::vector<int> indices;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".bin") {
            indices.push_back(std::stoi(entry.path().stem().string()));
        }
    }
    std::sort(indices.begin(), indices.end());
    return indices;
}

LabeledPointCloud load_scan_checked(const fs::path& root, const std::string& seq, int idx) {
    return read_scan(scan_bin_path(root, seq, idx).string(),
                     scan_label_path(root, seq, idx).string());
}

ClassMap resolve_class_map(const std::string& name) {
    if (name == "none" || name.empty()) return ClassMap{};
    if (name == "semantic-kitti") return ClassMap::semantic_kitti();
    if (name == "kitti360") return ClassMap::kitti360();
    std::ifstream in(name);
    if (!in) throw DataError("cannot open class map file: " + name);
    nlohmann::json j;
    in >> j;
    return ClassMap::from_json(j);
}

GraphStore load_graph_store(const fs::path& graphs_dir, const std::string& seq) {
    GraphStore store;
    const fs::path dir = graphs_dir / seq;
    if (!fs::is_directory(dir)) {
        throw DataError("no cached graphs under " + dir.string() +
                        "; run `sgloop build-graphs` first");
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".sgraph") {
            store.put(seq, std::stoi(entry.path().stem().string()),
                      load_graph(entry.path().string()));
        }
    }
    return store;
}

std::vector<std::string> sequences_in_pairs(const PairSet& pairs) {
    std::vector<std::string> seqs;
    for (const auto& p : pairs.pairs) {
        if (std::find(seqs.begin(), seqs.end(), p.seq_id) == seqs.end()) {
            seqs.push_back(p.seq_id);
        }
    }
    return seqs;
}

void write_json(const nlohmann::json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open output file: " + path.string());
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out, const std::string& seq,
              const std::string& kind, std::optional<std::uint64_t> seed_flag,
              std::optional<int> places_flag) {
    AppConfig cfg = load_config(config_path);
    if (seed_flag) cfg.seed = *seed_flag;
    if (places_flag) cfg.synth_places = *places_flag;

    if (kind == "places") {
        synth::Scenes scenes = synth::synth_scenes(cfg.seed, cfg.synth_places,
                                                   cfg.synth_revisit_fraction, cfg.noise,
                                                   cfg.render, seq);
        std::vector<PoseSE3> poses = scenes.poses;
        synth::write_dataset(out, seq, scenes.scans, poses);
        PairSet set;
        set.pairs = scenes.pairs;
        set.d_pos = cfg.pair_d_pos;
        set.d_neg = cfg.pair_d_neg;
        set.seed = cfg.seed;
        save_pairs(set, (fs::path(out) / seq / "pairs.json").string(), cfg.config_hash());
        std::cout << "wrote " << scenes.scans.size() << " scans, " << scenes.pairs.size()
                  << " pairs under " << (fs::path(out) / seq).string() << "\n";
    } else if (kind == "square") {
        synth::Sequence s = synth::make_square_sequence(cfg.seed, {}, cfg.render);
        synth::write_dataset(out, seq, s.scans, s.gt_poses, s.odom_poses);
        std::cout << "wrote square sequence with " << s.scans.size() << " scans under "
                  << (fs::path(out) / seq).string() << "\n";
    } else {
        throw DataError("unknown synth kind '" + kind + "' (expected places|square)");
    }
    nlohmann::json meta;
    meta["config_hash"] = cfg.config_hash();
    meta["kind"] = kind;
    meta["seed"] = cfg.seed;
    write_json(meta, fs::path(out) / seq / "meta.json");
    return 0;
}

int cmd_build_graphs(const std::string& config_path, const std::string& dataset_root,
                     const std::string& seq, const std::string& out,
                     std::optional<int> max_nodes_flag, std::optional<std::uint64_t> seed_flag,
                     const std::string& class_map_name, bool eval_mode) {
    AppConfig cfg = load_config(config_path);
    if (max_nodes_flag) cfg.graph.max_nodes = *max_nodes_flag;
    if (seed_flag) cfg.seed = *seed_flag;
    if (eval_mode) cfg.graph.random_subsample = false;
    const ClassMap class_map = resolve_class_map(class_map_name);

    const auto indices = scan_indices(dataset_root, seq);
    if (indices.empty()) throw DataError("no scans found under " + dataset_root + "/" + seq);
    std::vector<std::string> missing;
    for (int idx : indices) {
        if (!fs::exists(scan_label_path(dataset_root, seq, idx))) {
            missing.push_back(scan_label_path(dataset_root, seq, idx).string());
        }
    }
    if (!missing.empty()) {
        std::string msg = "missing label files:";
        for (const auto& m : missing) msg += "\n  " + m;
        throw DataError(msg);
    }

    fs::create_directories(fs::path(out) / seq);
    std::map<int, int> node_histogram;
    for (int idx : indices) {
        LabeledPointCloud cloud = load_scan_checked(dataset_root, seq, idx);
        if (!class_map.map.empty()) cloud = remap(cloud, class_map).cloud;
        const SemanticGraph g = build_graph(cloud, cfg.graph.max_nodes,
                                            derive_seed(cfg.seed, static_cast<std::uint64_t>(idx)),
                                            cfg.graph);
        node_histogram[g.valid_count()]++;
        cache_graph(g, (fs::path(out) / seq / (scan_id(idx) + ".sgraph")).string(),
                    fnv1a64(cfg.config_hash()));
    }

    nlohmann::json index;
    index["config_hash"] = cfg.config_hash();
    index["sequence"] = seq;
    index["count"] = indices.size();
    index["max_nodes"] = cfg.graph.max_nodes;
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [nodes, count] : node_histogram) hist[std::to_string(nodes)] = count;
    index["node_histogram"] = hist;
    write_json(index, fs::path(out) / seq / "index.json");

    std::cout << "cached " << indices.size() << " graphs for sequence " << seq << "\n";
    std::cout << "node-count histogram:\n";
    for (const auto& [nodes, count] : node_histogram) {
        std::cout << "  " << nodes << " nodes: " << count << " scans\n";
    }
    return 0;
}

int cmd_make_pairs(const std::string& config_path, const std::string& dataset_root,
                   const std::string& seq, const std::string& out, std::optional<int> count_flag,
                   std::optional<std::uint64_t> seed_flag) {
    AppConfig cfg = load_config(config_path);
    if (count_flag) cfg.pair_count = *count_flag;
    if (seed_flag) cfg.seed = *seed_flag;

    const fs::path pose_path = fs::path(dataset_root) / seq / "poses.txt";
    const std::vector<PoseSE3> poses = read_poses(pose_path.string());
    std::vector<Eigen::Vector3d> positions;
    positions.reserve(poses.size());
    for (const auto& p : poses) positions.push_back(p.translation);

    PairSet set = generate_pairs(positions, cfg.pair_d_pos, cfg.pair_d_neg,
                                 static_cast<std::size_t>(cfg.pair_count), cfg.seed, seq);
    save_pairs(set, out, cfg.config_hash());
    if (set.insufficient) {
        std::cerr << "warning: fewer candidate pairs than requested; emitted "
                  << set.pairs.size() << "\n";
    }
    std::cout << "wrote " << set.pairs.size() << " pairs to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& pairs_path,
              const std::string& graphs_dir, const std::string& out,
              std::optional<int> epochs_flag, std::optional<std::uint64_t> seed_flag,
              const std::string& log_path) {
    AppConfig cfg = load_config(config_path);
    if (epochs_flag) cfg.train.epochs = *epochs_flag;
    if (seed_flag) cfg.seed = *seed_flag;
    cfg.train.seed = cfg.seed;
    cfg.train.model.max_nodes = cfg.graph.max_nodes;

    const PairSet pairs = load_pairs(pairs_path);
    GraphStore store;
    for (const auto& seq : sequences_in_pairs(pairs)) {
        GraphStore part = load_graph_store(graphs_dir, seq);
        for (auto& [key, g] : part.graphs) store.graphs.insert_or_assign(key, std::move(g));
    }

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
        if (!log) throw DataError("cannot open training log: " + log_path);
        log << "# config_hash=" << cfg.config_hash() << "\n";
    }
    TrainResult result = train(cfg.train, pairs.pairs, store, [&](const EpochStats& s) {
        std::cout << "epoch=" << s.epoch << " loss=" << s.loss << " val_max_f1=" << s.val_max_f1
                  << " seconds=" << s.seconds << "\n";
        if (log) {
            log << "epoch=" << s.epoch << " loss=" << s.loss << " val_max_f1=" << s.val_max_f1
                << " seconds=" << s.seconds << "\n";
        }
    });
    result.checkpoint.train_config["config_hash"] = cfg.config_hash();
    save_checkpoint(result.checkpoint, out);
    std::cout << "checkpoint written to " << out
              << " (decision threshold " << result.checkpoint.decision_threshold << ")\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint_path,
             const std::string& pairs_path, const std::string& graphs_dir,
             const std::string& dataset_root, const std::string& perturb_name_str,
             const std::string& out, bool plot, std::optional<std::uint64_t> seed_flag) {
    AppConfig cfg = load_config(config_path);
    if (seed_flag) cfg.seed = *seed_flag;
    const PerturbKind kind = parse_perturb(perturb_name_str);

    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const PlaceModel model = ck.model();
    const PairSet pairs = load_pairs(pairs_path);
    const auto seqs = sequences_in_pairs(pairs);

    GraphStore reference;
    GraphStore query;
    if (kind == PerturbKind::none) {
        if (graphs_dir.empty()) {
            throw DataError("eval without perturbation requires --graphs");
        }
        for (const auto& seq : seqs) {
            GraphStore part = load_graph_store(graphs_dir, seq);
            for (auto& [key, g] : part.graphs) {
                reference.graphs.insert_or_assign(key, std::move(g));
            }
        }
        query = reference;
    } else {
        if (dataset_root.empty()) {
            throw DataError("eval with --perturb requires --dataset-root to rebuild graphs "
                            "from perturbed scans");
        }
        GraphBuildOptions opts = cfg.graph;
        opts.max_nodes = model.config.max_nodes;
        opts.random_subsample = false;
        for (const auto& seq : seqs) {
            for (int idx : scan_indices(dataset_root, seq)) {
                const LabeledPointCloud cloud = load_scan_checked(dataset_root, seq, idx);
                const std::uint64_t scan_seed =
                    derive_seed(cfg.seed, static_cast<std::uint64_t>(idx));
                reference.put(seq, idx, build_graph(cloud, opts.max_nodes, scan_seed, opts));
                // Only the query scan of each pair is perturbed.
                query.put(seq, idx,
                          build_graph(perturb(cloud, kind, scan_seed), opts.max_nodes, scan_seed,
                                      opts));
            }
        }
    }

    const EvalReport report = evaluate(model, pairs.pairs, query, reference, perturb_name_str);
    save_report(report, out, cfg.config_hash());
    for (const auto& s : report.skipped) std::cerr << "warning: skipped pair scan " << s << "\n";
    std::cout << "evaluated=" << report.evaluated << " max_f1=" << report.max_f1_score
              << " auc=" << report.auc_score << " best_threshold=" << report.best_threshold
              << "\n";

    if (plot) {
        svg::Series series;
        series.label = "PR (AUC " + std::to_string(report.auc_score) + ")";
        for (const auto& p : report.curve) series.points.push_back({p.recall, p.precision});
        const fs::path plot_path = fs::path(out).replace_extension(".svg");
        svg::write_line_plot(plot_path.string(), "Precision-Recall", "recall", "precision",
                             {series});
        std::cout << "plot written to " << plot_path.string() << "\n";
    }
    return 0;
}

int cmd_loop_close(const std::string& config_path, const std::string& checkpoint_path,
                   const std::string& dataset_root, const std::string& seq,
                   std::optional<double> threshold_flag, const std::string& out_dir, bool plot,
                   std::optional<std::uint64_t> seed_flag) {
    AppConfig cfg = load_config(config_path);
    if (seed_flag) cfg.seed = *seed_flag;
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const PlaceModel model = ck.model();
    double threshold = ck.decision_threshold;
    if (threshold_flag) threshold = *threshold_flag;
    else if (cfg.loop_threshold >= 0) threshold = cfg.loop_threshold;

    const auto indices = scan_indices(dataset_root, seq);
    if (indices.empty()) throw DataError("no scans under " + dataset_root + "/" + seq);

    const fs::path odom_path = fs::path(dataset_root) / seq / "odometry.txt";
    const fs::path gt_path = fs::path(dataset_root) / seq / "poses.txt";
    const bool have_gt = fs::exists(gt_path);
    std::vector<PoseSE3> odometry;
    if (fs::exists(odom_path)) {
        odometry = read_poses(odom_path.string());
    } else if (have_gt) {
        odometry = read_poses(gt_path.string());
    } else {
        throw DataError("need odometry.txt or poses.txt under " +
                        (fs::path(dataset_root) / seq).string());
    }
    if (odometry.size() != indices.size()) {
        throw DataError("odometry pose count does not match scan count");
    }

    // Keyframes, graphs and graph vectors.
    std::vector<int> keyframes;
    for (std::size_t k = 0; k < indices.size(); k += static_cast<std::size_t>(
                                                    std::max(1, cfg.loop_keyframe_stride))) {
        keyframes.push_back(indices[k]);
    }
    GraphBuildOptions opts = cfg.graph;
    opts.max_nodes = model.config.max_nodes;
    opts.random_subsample = false;
    std::map<int, LabeledPointCloud> clouds;
    std::map<int, Eigen::VectorXd> vectors;
    for (int idx : keyframes) {
        clouds[idx] = load_scan_checked(dataset_root, seq, idx);
        vectors[idx] =
            model
                .encode_graph(build_graph(clouds[idx], opts.max_nodes,
                                          derive_seed(cfg.seed, static_cast<std::uint64_t>(idx)),
                                          opts))
                .e;
    }

    struct LoopHit {
        int i, j;
        double similarity;
        double fitness = 0.0;
        PoseSE3 relative;
        bool registered = false;
    };
    std::vector<LoopHit> hits;
    for (std::size_t a = 0; a < keyframes.size(); ++a) {
        for (std::size_t b = a + static_cast<std::size_t>(cfg.loop_min_separation);
             b < keyframes.size(); ++b) {
            const int i = keyframes[a];
            const int j = keyframes[b];
            const double p = model.predict_vectors(vectors[i], vectors[j]);
            if (p >= threshold) hits.push_back({i, j, p, 0.0, PoseSE3::identity(), false});
        }
    }
    std::sort(hits.begin(), hits.end(),
              [](const LoopHit& x, const LoopHit& y) { return x.similarity > y.similarity; });

    // Verify candidates geometrically; keep registrations that pass fitness.
    std::vector<LoopHit> accepted;
    for (auto& hit : hits) {
        try {
            const RegistrationResult reg =
                register_scans(clouds[hit.j], clouds[hit.i], cfg.registration);
            if (reg.accepted) {
                hit.fitness = reg.fitness;
                hit.relative = reg.pose;  // pose of scan j expressed in frame i
                hit.registered = true;
                accepted.push_back(hit);
            }
        } catch (const NumericalError&) {
            continue;  // unconstrained candidate, drop it
        }
    }

    // Pose graph: odometry chain plus accepted loop constraints.
    PoseGraph graph;
    graph.add_node(odometry.front());
    for (std::size_t k = 1; k < odometry.size(); ++k) {
        Factor f;
        f.kind = Factor::Kind::odometry;
        f.i = static_cast<int>(k) - 1;
        f.j = static_cast<int>(k);
        f.measurement = odometry[k - 1].inverse() * odometry[k];
        graph.add_factor(f);
    }
    std::map<int, int> node_of_scan;
    for (std::size_t k = 0; k < indices.size(); ++k) node_of_scan[indices[k]] = static_cast<int>(k);
    for (const auto& hit : accepted) {
        graph.add_factor(make_loop_factor(node_of_scan[hit.i], node_of_scan[hit.j],
                                          hit.relative.inverse(), hit.fitness));
    }

    Trajectory optimized = accepted.empty() ? odometry : graph.optimize();

    fs::create_directories(out_dir);
    const fs::path traj_path = fs::path(out_dir) / "trajectory.txt";
    write_poses(optimized, traj_path.string());

    nlohmann::json report;
    report["version"] = 1;
    report["config_hash"] = cfg.config_hash();
    report["sequence"] = seq;
    report["similarity_threshold"] = threshold;
    report["loops_considered"] = hits.size();
    report["loops_accepted"] = accepted.size();
    auto loop_list = nlohmann::json::array();
    for (const auto& hit : accepted) {
        loop_list.push_back({{"i", hit.i},
                             {"j", hit.j},
                             {"similarity", hit.similarity},
                             {"fitness", hit.fitness}});
    }
    report["loops"] = loop_list;
    if (accepted.empty()) {
        report["note"] = "no loops found; output trajectory equals the odometry input";
    }
    if (have_gt) {
        const std::vector<PoseSE3> gt = read_poses(gt_path.string());
        if (gt.size() == optimized.size()) {
            report["ate_odometry"] = ate(odometry, gt);
            report["ate_optimized"] = ate(optimized, gt);
            std::cout << "ATE odometry=" << report["ate_odometry"].get<double>()
                      << " optimized=" << report["ate_optimized"].get<double>() << "\n";
        }
    }
    write_json(report, fs::path(out_dir) / "report.json");
    std::cout << "loops accepted: " << accepted.size() << "; trajectory written to "
              << traj_path.string() << "\n";

    if (plot) {
        std::vector<svg::Series> series;
        svg::Series odo{"odometry", "#d62728", {}};
        for (const auto& p : odometry) odo.points.push_back({p.translation.x(), p.translation.y()});
        svg::Series opt{"optimized", "#1f77b4", {}};
        for (const auto& p : optimized) opt.points.push_back({p.translation.x(), p.translation.y()});
        series.push_back(odo);
        series.push_back(opt);
        if (have_gt) {
            svg::Series gts{"ground truth", "#2ca02c", {}};
            for (const auto& p : read_poses(gt_path.string())) {
                gts.points.push_back({p.translation.x(), p.translation.y()});
            }
            series.push_back(gts);
        }
        svg::write_line_plot((fs::path(out_dir) / "trajectory.svg").string(), "Trajectory", "x [m]",
                             "y [m]", series);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sgloop: semantic-graph loop closure toolkit"};
    app.require_subcommand(1);

    std::string config_path, dataset_root, seq = "00", out, graphs_dir, pairs_path,
                checkpoint_path, class_map_name = "none", kind = "places",
                perturb_name_str = "none", log_path;
    std::optional<std::uint64_t> seed_flag;
    std::optional<int> places_flag, max_nodes_flag, count_flag, epochs_flag;
    std::optional<double> threshold_flag;
    bool plot = false;
    bool eval_mode = false;

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    synth_cmd->add_option("--config", config_path);
    synth_cmd->add_option("--out", out)->required();
    synth_cmd->add_option("--seq", seq);
    synth_cmd->add_option("--kind", kind)->check(CLI::IsMember({"places", "square"}));
    synth_cmd->add_option("--seed", seed_flag);
    synth_cmd->add_option("--places", places_flag);

    auto* build_cmd = app.add_subcommand("build-graphs", "cache semantic graphs per scan");
    build_cmd->add_option("--config", config_path);
    build_cmd->add_option("--dataset-root", dataset_root)->required();
    build_cmd->add_option("--seq", seq);
    build_cmd->add_option("--out", out)->required();
    build_cmd->add_option("--max-nodes", max_nodes_flag);
    build_cmd->add_option("--seed", seed_flag);
    build_cmd->add_option("--class-map", class_map_name,
                          "none|semantic-kitti|kitti360|<path.json>");
    build_cmd->add_flag("--eval-mode", eval_mode, "disable random subsampling above the cap");

    auto* pairs_cmd = app.add_subcommand("make-pairs", "label scan pairs by pose distance");
    pairs_cmd->add_option("--config", config_path);
    pairs_cmd->add_option("--dataset-root", dataset_root)->required();
    pairs_cmd->add_option("--seq", seq);
    pairs_cmd->add_option("--out", out)->required();
    pairs_cmd->add_option("--count", count_flag);
    pairs_cmd->add_option("--seed", seed_flag);

    auto* train_cmd = app.add_subcommand("train", "train encoder + comparator on pairs");
    train_cmd->add_option("--config", config_path);
    train_cmd->add_option("--pairs", pairs_path)->required();
    train_cmd->add_option("--graphs", graphs_dir)->required();
    train_cmd->add_option("--out", out)->required();
    train_cmd->add_option("--epochs", epochs_flag);
    train_cmd->add_option("--seed", seed_flag);
    train_cmd->add_option("--log", log_path, "epoch log file (key=value per line)");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on pairs");
    eval_cmd->add_option("--config", config_path);
    eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
    eval_cmd->add_option("--pairs", pairs_path)->required();
    eval_cmd->add_option("--graphs", graphs_dir);
    eval_cmd->add_option("--dataset-root", dataset_root);
    eval_cmd->add_option("--perturb", perturb_name_str)
        ->check(CLI::IsMember({"none", "rotate", "occlude", "both"}));
    eval_cmd->add_option("--out", out)->required();
    eval_cmd->add_option("--seed", seed_flag);
    eval_cmd->add_flag("--plot", plot, "write a PR-curve SVG next to the report");

    auto* loop_cmd = app.add_subcommand("loop-close", "full loop-closure pipeline");
    loop_cmd->add_option("--config", config_path);
    loop_cmd->add_option("--checkpoint", checkpoint_path)->required();
    loop_cmd->add_option("--dataset-root", dataset_root)->required();
    loop_cmd->add_option("--seq", seq);
    loop_cmd->add_option("--threshold", threshold_flag);
    loop_cmd->add_option("--out", out)->required();
    loop_cmd->add_option("--seed", seed_flag);
    loop_cmd->add_flag("--plot", plot, "write a trajectory SVG");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (synth_cmd->parsed()) {
            return cmd_synth(config_path, out, seq, kind, seed_flag, places_flag);
        }
        if (build_cmd->parsed()) {
            return cmd_build_graphs(config_path, dataset_root, seq, out, max_nodes_flag,
                                    seed_flag, class_map_name, eval_mode);
        }
        if (pairs_cmd->parsed()) {
            return cmd_make_pairs(config_path, dataset_root, seq, out, count_flag, seed_flag);
        }
        if (train_cmd->parsed()) {
            return cmd_train(config_path, pairs_path, graphs_dir, out, epochs_flag, seed_flag,
                             log_path);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(config_path, checkpoint_path, pairs_path, graphs_dir, dataset_root,
                            perturb_name_str, out, plot, seed_flag);
        }
        if (loop_cmd->parsed()) {
            return cmd_loop_close(config_path, checkpoint_path, dataset_root, seq,
                                  threshold_flag, out, plot, seed_flag);
        }
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
