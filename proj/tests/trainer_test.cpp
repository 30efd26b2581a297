#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sgloop/checkpoint.hpp"
#include "sgloop/synth.hpp"
#include "sgloop/trainer.hpp"
#include "test_util.hpp"

using namespace sgloop;

namespace {

struct SynthFixture {
    GraphStore store;
    std::vector<ScanPair> pairs;
};

SynthFixture make_fixture(std::uint64_t seed, int places, double revisit, int max_nodes,
                          int rings = 8, int azimuth = 240) {
    synth::RenderParams rp;
    rp.rings = rings;
    rp.azimuth_steps = azimuth;
    const synth::Scenes scenes = synth::synth_scenes(seed, places, revisit, {}, rp);
    SynthFixture fx;
    for (std::size_t i = 0; i < scenes.scans.size(); ++i) {
        fx.store.put("synthetic", static_cast<int>(i),
                     build_graph(scenes.scans[i], max_nodes, derive_seed(seed, i)));
    }
    fx.pairs = scenes.pairs;
    return fx;
}

TrainConfig small_train_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.model = test_util::tiny_config();
    cfg.model.num_classes = 12;
    cfg.model.max_nodes = 24;
    cfg.learning_rate = 5e-3;
    cfg.batch_size = 16;
    cfg.epochs = 5;
    cfg.seed = seed;
    cfg.val_fraction = 0.15;
    return cfg;
}

}  // namespace

TEST_CASE("one AdamW step at small learning rate decreases loss on a frozen batch") {
    const ModelConfig mc = test_util::tiny_config();
    PlaceModel model = PlaceModel::init(mc, 3);
    std::vector<SemanticGraph> graphs;
    for (int i = 0; i < 8; ++i) {
        graphs.push_back(test_util::random_graph(600 + i, 5, mc.max_nodes, mc.num_classes));
    }
    std::vector<PairExample> batch;
    for (int i = 0; i < 4; ++i) {
        batch.push_back({&graphs[static_cast<std::size_t>(2 * i)],
                         &graphs[static_cast<std::size_t>(2 * i + 1)], i % 2});
    }

    const PlaceModel::BatchResult before = model.loss_and_gradients(batch);
    AdamW opt(1e-5, 0.9, 0.999, 0.0);
    opt.step(model.params, before.gradients);
    const PlaceModel::BatchResult after = model.loss_and_gradients(batch);
    CHECK(after.loss < before.loss);
}

TEST_CASE("loss decreases over the first epochs on the synthetic set") {
    SynthFixture fx = make_fixture(7, 10, 0.8, 24);
    TrainConfig cfg = small_train_config(7);
    const TrainResult result = train(cfg, fx.pairs, fx.store);
    REQUIRE(result.history.size() == 5);
    CHECK(result.history.back().loss < result.history.front().loss);
}

TEST_CASE("identical seeds give identical final loss") {
    SynthFixture fx = make_fixture(9, 8, 0.75, 24);
    TrainConfig cfg = small_train_config(11);
    cfg.epochs = 3;
    const TrainResult a = train(cfg, fx.pairs, fx.store);
    const TrainResult b = train(cfg, fx.pairs, fx.store);
    CHECK(std::abs(a.history.back().loss - b.history.back().loss) <= 1e-6);
}

TEST_CASE("missing cached graphs fail with an actionable message") {
    SynthFixture fx = make_fixture(13, 4, 0.5, 24);
    fx.pairs.push_back({"synthetic", 0, 777, 0});
    TrainConfig cfg = small_train_config(1);
    CHECK_THROWS_WITH(train(cfg, fx.pairs, fx.store),
                      Catch::Matchers::ContainsSubstring("build-graphs"));
}

TEST_CASE("ablation toggles change the parameter set as specified") {
    ModelConfig full = test_util::tiny_config();
    const std::size_t full_count = param_count(full);

    ModelConfig no_gat = full;
    no_gat.use_gat = false;
    const ParamDict mean_params = init_params(no_gat, 0);
    CHECK(mean_params.count("enc.sem.W") == 1);  // single mean-aggregation map
    CHECK(mean_params.count("enc.sem.W0") == 0);
    CHECK(mean_params.count("enc.sem.a0") == 0);
    CHECK(param_count(no_gat) != full_count);

    ModelConfig no_geo = full;
    no_geo.use_geo = false;
    const ParamDict geo_params = init_params(no_geo, 0);
    CHECK(geo_params.count("enc.geo.W0") == 0);
    // fusion width shrinks from 3F' to 2F'
    CHECK(geo_params.at("enc.fuse.Q").cols() == 2 * full.embed_dim);

    ModelConfig no_att = full;
    no_att.use_att = false;
    const ParamDict att_params = init_params(no_att, 0);
    CHECK(att_params.count("enc.embed.Q") == 0);

    ModelConfig baseline = full;
    baseline.use_diff = baseline.use_gat = baseline.use_geo = baseline.use_att = false;
    const ParamDict base_params = init_params(baseline, 0);
    CHECK(base_params.count("cmp.W1") == 0);
    CHECK(base_params.count("cmp.W2") == 0);
    CHECK(base_params.count("enc.sem.W") == 1);
    CHECK(base_params.count("enc.embed.Q") == 0);
    CHECK(param_count(baseline) < full_count);

    // Every variant still trains and evaluates.
    SynthFixture fx = make_fixture(15, 6, 0.7, 24);
    for (const ModelConfig& mc : {no_gat, no_geo, no_att, baseline}) {
        TrainConfig cfg = small_train_config(2);
        cfg.model = mc;
        cfg.model.num_classes = 12;
        cfg.model.max_nodes = 24;
        cfg.epochs = 1;
        CHECK_NOTHROW(train(cfg, fx.pairs, fx.store));
    }
}

TEST_CASE("checkpoint round-trip is bit-exact and predictions survive") {
    test_util::TempDir dir("checkpoint");
    SynthFixture fx = make_fixture(17, 6, 0.7, 24);
    TrainConfig cfg = small_train_config(21);
    cfg.epochs = 2;
    TrainResult result = train(cfg, fx.pairs, fx.store);

    const std::string path = (dir.path() / "model.ckpt").string();
    save_checkpoint(result.checkpoint, path);
    const Checkpoint back = load_checkpoint(path);

    REQUIRE(back.params.size() == result.checkpoint.params.size());
    for (const auto& [name, m] : result.checkpoint.params) {
        CHECK(back.params.at(name) == m);  // bit-exact round trip
    }
    CHECK(back.decision_threshold == result.checkpoint.decision_threshold);
    REQUIRE(back.history.size() == result.checkpoint.history.size());

    const PlaceModel a = result.checkpoint.model();
    const PlaceModel b = back.model();
    const SemanticGraph* g0 = fx.store.find("synthetic", fx.pairs[0].i);
    const SemanticGraph* g1 = fx.store.find("synthetic", fx.pairs[0].j);
    REQUIRE(g0 != nullptr);
    REQUIRE(g1 != nullptr);
    CHECK(a.predict_pair(*g0, *g1) == b.predict_pair(*g0, *g1));
}

TEST_CASE("checkpoint with a tampered class count is rejected on load") {
    test_util::TempDir dir("checkpoint_bad");
    Checkpoint ck;
    ck.model_config = test_util::tiny_config();
    ck.params = init_params(ck.model_config, 3);
    const std::string path = (dir.path() / "m.ckpt").string();

    ck.model_config.num_classes += 2;  // params no longer match the config
    save_checkpoint(ck, path);
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
}

TEST_CASE("train rejects invalid hyperparameters") {
    TrainConfig cfg = small_train_config(0);
    cfg.learning_rate = -1;
    CHECK_THROWS_AS(cfg.validate(), DataError);
    cfg = small_train_config(0);
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), DataError);
}
