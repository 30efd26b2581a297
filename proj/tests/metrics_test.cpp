#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "sgloop/evaluator.hpp"
#include "sgloop/metrics.hpp"
#include "sgloop/perturb.hpp"
#include "sgloop/semantic_graph.hpp"
#include "test_util.hpp"

using namespace sgloop;

namespace {

// Exhaustive O(n^2) oracle: for every unique score, rescan all samples and
// count the confusion entries from scratch.
struct OraclePoint {
    double threshold, precision, recall;
};

std::vector<OraclePoint> brute_force_pr(const std::vector<double>& scores,
                                        const std::vector<int>& labels) {
    std::set<double, std::greater<double>> thresholds(scores.begin(), scores.end());
    long positives = 0;
    for (int l : labels) positives += l;
    std::vector<OraclePoint> out;
    for (double t : thresholds) {
        long tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) {
                if (labels[i] == 1) ++tp; else ++fp;
            }
        }
        OraclePoint p;
        p.threshold = t;
        p.precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        p.recall = static_cast<double>(tp) / static_cast<double>(positives);
        out.push_back(p);
    }
    return out;
}

double brute_force_max_f1(const std::vector<OraclePoint>& curve) {
    double best = 0.0;
    for (const auto& p : curve) {
        const double denom = p.precision + p.recall;
        best = std::max(best, denom == 0.0 ? 0.0 : 2.0 * p.precision * p.recall / denom);
    }
    return best;
}

double brute_force_auc(const std::vector<OraclePoint>& curve) {
    double area = 0.0, pr = 0.0, pp = 1.0;
    for (const auto& p : curve) {
        area += (p.recall - pr) * 0.5 * (p.precision + pp);
        pr = p.recall;
        pp = p.precision;
    }
    return area;
}

}  // namespace

TEST_CASE("pr_curve matches the hand-enumerated 4-sample case") {
    const std::vector<double> scores{0.9, 0.8, 0.7, 0.1};
    const std::vector<int> labels{1, 0, 1, 0};
    const auto curve = pr_curve(scores, labels);
    const auto oracle = brute_force_pr(scores, labels);
    REQUIRE(curve.size() == oracle.size());
    for (std::size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve[i].threshold == oracle[i].threshold);
        CHECK(curve[i].precision == oracle[i].precision);
        CHECK(curve[i].recall == oracle[i].recall);
    }
    CHECK(max_f1(curve) == brute_force_max_f1(oracle));
    CHECK(max_f1(curve) == Catch::Approx(0.8).margin(1e-12));  // threshold 0.7: P=2/3, R=1
}

TEST_CASE("pr metrics equal the brute-force oracle exactly on random sets") {
    Rng rng = make_rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> size_dist(4, 400);
    std::uniform_int_distribution<int> quant(1, 20);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = size_dist(rng);
        const int levels = quant(rng);  // coarse scores force threshold ties
        std::vector<double> scores;
        std::vector<int> labels;
        bool has0 = false, has1 = false;
        for (int i = 0; i < n; ++i) {
            scores.push_back(std::round(u(rng) * levels) / levels);
            labels.push_back(u(rng) < 0.4 ? 1 : 0);
            has0 |= labels.back() == 0;
            has1 |= labels.back() == 1;
        }
        if (!has0 || !has1) continue;
        const auto curve = pr_curve(scores, labels);
        const auto oracle = brute_force_pr(scores, labels);
        REQUIRE(curve.size() == oracle.size());
        for (std::size_t i = 0; i < curve.size(); ++i) {
            CHECK(curve[i].precision == oracle[i].precision);
            CHECK(curve[i].recall == oracle[i].recall);
        }
        CHECK(max_f1(curve) == brute_force_max_f1(oracle));
        CHECK(auc(curve) == brute_force_auc(oracle));
    }
}

TEST_CASE("perfect separation reaches P = R = 1 and AUC 1") {
    const std::vector<double> scores{0.95, 0.9, 0.2, 0.1};
    const std::vector<int> labels{1, 1, 0, 0};
    const auto curve = pr_curve(scores, labels);
    bool perfect = false;
    for (const auto& p : curve) perfect |= (p.precision == 1.0 && p.recall == 1.0);
    CHECK(perfect);
    CHECK(max_f1(curve) == 1.0);
    CHECK(auc(curve) == 1.0);

    // scores equal to the 0/1 labels exactly
    const auto exact = pr_curve({1.0, 0.0, 1.0, 0.0}, {1, 0, 1, 0});
    CHECK(auc(exact) == 1.0);
}

TEST_CASE("pr_curve rejects degenerate inputs") {
    CHECK_THROWS_AS(pr_curve({0.5, 0.7}, {1, 1}), DataError);
    CHECK_THROWS_AS(pr_curve({0.5, 0.7}, {0, 0}), DataError);
    CHECK_THROWS_AS(pr_curve({1.5, 0.2}, {1, 0}), DataError);
    CHECK_THROWS_AS(pr_curve({}, {}), DataError);
}

TEST_CASE("random scores on balanced labels cluster max F1 near 2/3") {
    Rng rng = make_rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 10000; ++i) {
        scores.push_back(u(rng));
        labels.push_back(i % 2);
    }
    const double f1 = max_f1(pr_curve(scores, labels));
    CHECK(f1 == Catch::Approx(2.0 / 3.0).margin(0.1));
}

TEST_CASE("perturb_rotation preserves norms and count") {
    const SemanticGraph unused = test_util::random_graph(1, 3, 8, 6);
    LabeledPointCloud cloud;
    Rng rng = make_rng(21);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int i = 0; i < 500; ++i) {
        cloud.push_back({u(rng), u(rng), u(rng)}, static_cast<std::uint16_t>(i % 12),
                        static_cast<std::uint32_t>(i % 7));
    }
    double yaw = 0.0;
    const LabeledPointCloud rotated = perturb_rotation(cloud, 3, &yaw);
    REQUIRE(rotated.size() == cloud.size());
    CHECK(std::abs(yaw) <= kMaxPerturbYaw);
    CHECK(yaw != 0.0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        CHECK(std::abs(rotated.points[i].norm() - cloud.points[i].norm()) < 1e-9);
        CHECK(rotated.semantic[i] == cloud.semantic[i]);  // labels untouched
        CHECK(rotated.instance[i] == cloud.instance[i]);
    }

    SECTION("rotating then graph-building rotates the centroids by the same yaw") {
        const SemanticGraph before = build_graph(cloud, 20, 0);
        const SemanticGraph after = build_graph(rotated, 20, 0);
        REQUIRE(before.valid_count() == after.valid_count());
        const Eigen::Matrix3d r =
            Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
        for (int s = 0; s < before.valid_count(); ++s) {
            const Eigen::Vector3d expect = r * before.cen.row(s).transpose();
            CHECK((after.cen.row(s).transpose() - expect).norm() < 1e-9);
        }
    }
}

TEST_CASE("perturb_occlusion removes exactly the wedge") {
    SECTION("empty cloud stays empty") {
        CHECK(perturb_occlusion(LabeledPointCloud{}, 0).empty());
    }

    LabeledPointCloud cloud;
    Rng rng = make_rng(33);
    std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double a = u(rng);
        cloud.push_back({5.0 * std::cos(a), 5.0 * std::sin(a), 0.3}, 1, 1);
    }
    OcclusionWedge wedge;
    const LabeledPointCloud kept = perturb_occlusion(cloud, 17, &wedge);
    CHECK(wedge.width == Catch::Approx(M_PI / 6.0));

    for (std::size_t i = 0; i < kept.size(); ++i) {
        double az = std::atan2(kept.points[i].y(), kept.points[i].x());
        if (az < 0) az += 2.0 * M_PI;
        double rel = az - wedge.start;
        if (rel < 0) rel += 2.0 * M_PI;
        CHECK(rel >= wedge.width);  // survivors all lie outside the wedge
    }

    // Isotropic azimuths: removed fraction approximates 30/360.
    const double removed = static_cast<double>(n - kept.size()) / n;
    CHECK(removed == Catch::Approx(1.0 / 12.0).margin(0.01));
}

TEST_CASE("evaluate skips missing graphs and is deterministic") {
    const ModelConfig cfg = test_util::tiny_config();
    PlaceModel model = PlaceModel::init(cfg, 5);
    GraphStore store;
    for (int i = 0; i < 6; ++i) {
        store.put("s", i, test_util::random_graph(400 + i, 5, cfg.max_nodes, cfg.num_classes));
    }
    std::vector<ScanPair> pairs{{"s", 0, 1, 1}, {"s", 2, 3, 0}, {"s", 4, 5, 1},
                                {"s", 0, 99, 0}};  // 99 is missing

    const EvalReport a = evaluate(model, pairs, store);
    const EvalReport b = evaluate(model, pairs, store);
    CHECK(a.evaluated == 3);
    REQUIRE(a.skipped.size() == 1);
    CHECK(a.skipped[0] == "s:99");
    CHECK(a.max_f1_score == b.max_f1_score);
    CHECK(a.auc_score == b.auc_score);
    CHECK(a.scores == b.scores);
}

TEST_CASE("report json embeds the config hash and the curve") {
    const ModelConfig cfg = test_util::tiny_config();
    PlaceModel model = PlaceModel::init(cfg, 6);
    GraphStore store;
    for (int i = 0; i < 4; ++i) {
        store.put("s", i, test_util::random_graph(500 + i, 4, cfg.max_nodes, cfg.num_classes));
    }
    std::vector<ScanPair> pairs{{"s", 0, 1, 1}, {"s", 2, 3, 0}};
    const EvalReport r = evaluate(model, pairs, store);
    const nlohmann::json j = report_to_json(r, "deadbeef");
    CHECK(j.at("config_hash") == "deadbeef");
    CHECK(j.at("curve").size() == r.curve.size());
    CHECK(j.at("max_f1").get<double>() == r.max_f1_score);
}
