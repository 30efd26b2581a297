#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgloop/checkpoint.hpp"
#include "sgloop/metrics.hpp"
#include "sgloop/model.hpp"
#include "sgloop/pairs.hpp"

namespace sgloop {

// Training recipe: AdamW at 1e-4, batch 128, 50 epochs. Weight decay and betas
// are our defaults; there is no schedule.
struct TrainConfig {
    ModelConfig model;
    double learning_rate = 1e-4;
    int batch_size = 128;
    int epochs = 50;
    std::uint64_t seed = 0;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double val_fraction = 0.1;  // held out for decision-threshold selection

    void validate() const {
        model.validate();
        if (learning_rate <= 0 || batch_size <= 0 || epochs <= 0 || weight_decay < 0 ||
            val_fraction < 0 || val_fraction >= 1) {
            throw DataError("TrainConfig requires positive hyperparameters");
        }
    }

    nlohmann::json to_json() const {
        return {{"model", model.to_json()},
                {"learning_rate", learning_rate},
                {"batch_size", batch_size},
                {"epochs", epochs},
                {"seed", seed},
                {"weight_decay", weight_decay},
                {"beta1", beta1},
                {"beta2", beta2},
                {"val_fraction", val_fraction}};
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.seed = j.value("seed", c.seed);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.val_fraction = j.value("val_fraction", c.val_fraction);
        c.validate();
        return c;
    }
};

// Decoupled weight decay: p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
class AdamW {
public:
    AdamW(double lr, double beta1, double beta2, double weight_decay, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay), eps_(eps) {}

    void step(ParamDict& params, const ParamDict& grads) {
        ++steps_;
        const double bc1 = 1.0 - std::pow(beta1_, steps_);
        const double bc2 = 1.0 - std::pow(beta2_, steps_);
        for (auto& [name, p] : params) {
            const auto git = grads.find(name);
            if (git == grads.end()) throw DataError("missing gradient for parameter " + name);
            const ad::Mat& g = git->second;
            auto& [m, v] = moments_[name];
            if (m.size() == 0) {
                m = ad::Mat::Zero(p.rows(), p.cols());
                v = ad::Mat::Zero(p.rows(), p.cols());
            }
            m = beta1_ * m + (1.0 - beta1_) * g;
            v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
            const ad::Mat m_hat = m / bc1;
            const ad::Mat v_hat = v / bc2;
            p -= lr_ * (m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + eps_).matrix()) +
                        weight_decay_ * p);
        }
    }

    long steps() const { return steps_; }

private:
    double lr_, beta1_, beta2_, weight_decay_, eps_;
    long steps_ = 0;
    std::map<std::string, std::pair<ad::Mat, ad::Mat>> moments_;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochStats> history;
};

namespace detail {

inline std::vector<PairExample> resolve_pairs(const std::vector<ScanPair>& pairs,
                                              const GraphStore& store) {
    std::vector<PairExample> out;
    std::vector<std::string> missing;
    for (const auto& p : pairs) {
        const SemanticGraph* a = store.find(p.seq_id, p.i);
        const SemanticGraph* b = store.find(p.seq_id, p.j);
        if (!a || !b) {
            missing.push_back(p.seq_id + ":" + std::to_string(!a ? p.i : p.j));
            continue;
        }
        out.push_back({a, b, p.label});
    }
    if (!missing.empty()) {
        std::ostringstream ss;
        ss << "missing cached graphs for " << missing.size() << " scans (first: " << missing[0]
           << "); run build-graphs over the sequence first";
        throw DataError(ss.str());
    }
    return out;
}

inline std::vector<double> score_examples(const PlaceModel& model,
                                          const std::vector<PairExample>& examples) {
    std::vector<double> scores;
    scores.reserve(examples.size());
    for (const auto& ex : examples) {
        scores.push_back(model.predict_pair(*ex.first, *ex.second));
    }
    return scores;
}

}  // namespace detail

// End-to-end training. All randomness (init, shuffling, validation split) flows
// from config.seed. NaN loss aborts with a dump of the offending batch.
inline TrainResult train(const TrainConfig& config, const std::vector<ScanPair>& pairs,
                         const GraphStore& store,
                         const std::function<void(const EpochStats&)>& on_epoch = {}) {
    config.validate();
    if (pairs.empty()) throw DataError("training requires at least one pair");

    std::vector<PairExample> examples = detail::resolve_pairs(pairs, store);
    std::vector<ScanPair> meta = pairs;

    // Validation split for threshold selection.
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng = make_rng(derive_seed(config.seed, 0x51));
    std::shuffle(order.begin(), order.end(), split_rng);
    const std::size_t n_val =
        std::min(examples.size() - 1,
                 static_cast<std::size_t>(std::floor(config.val_fraction *
                                                     static_cast<double>(examples.size()))));
    std::vector<PairExample> val_set, train_set;
    std::vector<ScanPair> train_meta;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (r < n_val) {
            val_set.push_back(examples[order[r]]);
        } else {
            train_set.push_back(examples[order[r]]);
            train_meta.push_back(meta[order[r]]);
        }
    }

    PlaceModel model = PlaceModel::init(config.model, config.seed);
    AdamW optimizer(config.learning_rate, config.beta1, config.beta2, config.weight_decay);
    Rng shuffle_rng = make_rng(derive_seed(config.seed, 0xe90c));

    std::vector<EpochStats> history;
    std::vector<std::size_t> idx(train_set.size());
    std::iota(idx.begin(), idx.end(), 0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(idx.begin(), idx.end(), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < idx.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop =
                std::min(idx.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<PairExample> batch;
            batch.reserve(stop - start);
            for (std::size_t r = start; r < stop; ++r) batch.push_back(train_set[idx[r]]);

            PlaceModel::BatchResult res = model.loss_and_gradients(batch);
            if (!std::isfinite(res.loss)) {
                std::cerr << "NaN/Inf loss at epoch " << epoch << "; offending batch:\n";
                for (std::size_t r = start; r < stop; ++r) {
                    const auto& m = train_meta[idx[r]];
                    std::cerr << "  pair " << m.seq_id << " (" << m.i << "," << m.j
                              << ") label=" << m.label << " pred="
                              << res.predictions[r - start] << "\n";
                }
                throw NumericalError("training aborted: non-finite loss");
            }
            optimizer.step(model.params, res.gradients);
            loss_sum += res.loss;
            ++batches;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = batches == 0 ? 0.0 : loss_sum / static_cast<double>(batches);
        if (!val_set.empty()) {
            std::vector<double> scores = detail::score_examples(model, val_set);
            std::vector<int> labels;
            for (const auto& ex : val_set) labels.push_back(ex.label);
            const bool mixed = std::count(labels.begin(), labels.end(), 1) > 0 &&
                               std::count(labels.begin(), labels.end(), 0) > 0;
            stats.val_max_f1 = mixed ? max_f1(pr_curve(scores, labels)) : 0.0;
        }
        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }

    // Deployment threshold: max-F1 threshold on the validation split when it is
    // usable, otherwise on the training pairs.
    double threshold = 0.5;
    {
        const std::vector<PairExample>& pool = !val_set.empty() ? val_set : train_set;
        std::vector<double> scores = detail::score_examples(model, pool);
        std::vector<int> labels;
        for (const auto& ex : pool) labels.push_back(ex.label);
        const bool mixed = std::count(labels.begin(), labels.end(), 1) > 0 &&
                           std::count(labels.begin(), labels.end(), 0) > 0;
        if (mixed) threshold = max_f1_threshold(pr_curve(scores, labels));
    }

    TrainResult out;
    out.checkpoint.model_config = config.model;
    out.checkpoint.params = std::move(model.params);
    out.checkpoint.train_config = config.to_json();
    out.checkpoint.history = history;
    out.checkpoint.decision_threshold = threshold;
    out.history = std::move(history);
    return out;
}

}  // namespace sgloop
