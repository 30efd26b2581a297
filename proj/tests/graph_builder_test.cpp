#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "sgloop/semantic_graph.hpp"
#include "test_util.hpp"

using namespace sgloop;

namespace {

LabeledPointCloud instance_blob(const Eigen::Vector3d& center, int cls, std::uint32_t inst,
                                int n_points, double spread = 0.3) {
    LabeledPointCloud cloud;
    Rng rng = make_rng(inst * 7919u + 13u);
    std::uniform_real_distribution<double> u(-spread, spread);
    for (int i = 0; i < n_points; ++i) {
        cloud.push_back(center + Eigen::Vector3d(u(rng), u(rng), u(rng)),
                        static_cast<std::uint16_t>(cls), inst);
    }
    return cloud;
}

void append(LabeledPointCloud& dst, const LabeledPointCloud& src) {
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst.push_back(src.points[i], src.semantic[i], src.instance[i]);
    }
}

}  // namespace

TEST_CASE("build_graph computes centroid, bbox and one-hot for a single instance") {
    LabeledPointCloud cloud;
    cloud.push_back({0, 0, 0}, 3, 1);
    cloud.push_back({2, 2, 2}, 3, 1);
    GraphBuildOptions opts;
    opts.min_points = 2;
    const SemanticGraph g = build_graph(cloud, 50, 0, opts);

    REQUIRE(g.valid_count() == 1);
    CHECK(g.cen.row(0) == Eigen::RowVector3d(1, 1, 1));
    Eigen::Matrix<double, 1, 6> expected_box;
    expected_box << 0, 0, 0, 2, 2, 2;
    CHECK(g.bbox.row(0) == expected_box);
    CHECK(g.sem(0, 3) == 1.0);
    CHECK(g.sem.row(0).sum() == 1.0);
}

TEST_CASE("build_graph caps at max_nodes and pads below it") {
    SECTION("70 instances cap to exactly 50 valid slots") {
        LabeledPointCloud cloud;
        for (std::uint32_t i = 1; i <= 70; ++i) {
            append(cloud, instance_blob({static_cast<double>(i) * 3.0, 0, 0},
                                        static_cast<int>(i % 12), i, 8));
        }
        const SemanticGraph g = build_graph(cloud, 50, 42);
        CHECK(g.valid_count() == 50);
        CHECK(g.max_nodes == 50);
    }

    SECTION("30 instances leave 20 zero pseudo-nodes") {
        LabeledPointCloud cloud;
        for (std::uint32_t i = 1; i <= 30; ++i) {
            append(cloud, instance_blob({static_cast<double>(i) * 3.0, 0, 0},
                                        static_cast<int>(i % 12), i, 8));
        }
        const SemanticGraph g = build_graph(cloud, 50, 42);
        CHECK(g.valid_count() == 30);
        for (int s = 30; s < 50; ++s) {
            CHECK(g.mask[static_cast<std::size_t>(s)] == 0);
            CHECK(g.sem.row(s).cwiseAbs().sum() == 0.0);
            CHECK(g.cen.row(s).cwiseAbs().sum() == 0.0);
            CHECK(g.bbox.row(s).cwiseAbs().sum() == 0.0);
        }
        g.validate();
    }
}

TEST_CASE("point permutation leaves the node multiset unchanged") {
    LabeledPointCloud cloud;
    for (std::uint32_t i = 1; i <= 12; ++i) {
        append(cloud, instance_blob({static_cast<double>(i) * 2.5, double(i % 3), 0},
                                    static_cast<int>(i % 5), i, 10 + static_cast<int>(i)));
    }
    LabeledPointCloud shuffled = cloud;
    std::vector<std::size_t> order(cloud.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(5);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t r = 0; r < order.size(); ++r) {
        shuffled.points[r] = cloud.points[order[r]];
        shuffled.semantic[r] = cloud.semantic[order[r]];
        shuffled.instance[r] = cloud.instance[order[r]];
    }

    const SemanticGraph a = build_graph(cloud, 50, 9);
    const SemanticGraph b = build_graph(shuffled, 50, 9);
    REQUIRE(a.valid_count() == b.valid_count());
    // Content-based node ordering makes the slot order identical too, up to
    // floating-point reassociation in the centroid means.
    CHECK((a.sem - b.sem).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.cen - b.cen).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.bbox - b.bbox).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("every valid centroid lies inside its own bbox") {
    Rng rng = make_rng(31);
    std::uniform_int_distribution<int> n_inst(1, 20);
    for (int trial = 0; trial < 20; ++trial) {
        LabeledPointCloud cloud;
        const int n = n_inst(rng);
        for (int i = 1; i <= n; ++i) {
            append(cloud, instance_blob({double(3 * i), double(trial), 0}, i % 12,
                                        static_cast<std::uint32_t>(i), 5 + (i % 7)));
        }
        const SemanticGraph g = build_graph(cloud, 50, static_cast<std::uint64_t>(trial));
        for (int s : g.valid_slots()) {
            for (int d = 0; d < 3; ++d) {
                CHECK(g.bbox(s, d) <= g.cen(s, d) + 1e-12);
                CHECK(g.cen(s, d) <= g.bbox(s, d + 3) + 1e-12);
            }
        }
    }
}

TEST_CASE("rebuild with the same seed is deterministic under the cap") {
    LabeledPointCloud cloud;
    for (std::uint32_t i = 1; i <= 25; ++i) {
        append(cloud, instance_blob({double(i) * 2.0, 0, 0}, static_cast<int>(i % 12), i, 9));
    }
    const SemanticGraph a = build_graph(cloud, 10, 77);
    const SemanticGraph b = build_graph(cloud, 10, 77);
    CHECK(a.valid_count() == 10);
    CHECK(a.sem == b.sem);
    CHECK(a.cen == b.cen);
    CHECK(a.bbox == b.bbox);
}

TEST_CASE("mixed class ids in one instance resolve by majority, ties to lower id") {
    LabeledPointCloud cloud;
    for (int i = 0; i < 6; ++i) cloud.push_back({double(i), 0, 0}, 4, 1);
    for (int i = 0; i < 3; ++i) cloud.push_back({double(i), 1, 0}, 2, 1);
    GraphBuildOptions opts;
    opts.min_points = 5;
    SemanticGraph g = build_graph(cloud, 10, 0, opts);
    REQUIRE(g.valid_count() == 1);
    CHECK(g.sem(0, 4) == 1.0);  // majority wins

    LabeledPointCloud tie;
    for (int i = 0; i < 4; ++i) tie.push_back({double(i), 0, 0}, 7, 2);
    for (int i = 0; i < 4; ++i) tie.push_back({double(i), 1, 0}, 5, 2);
    opts.min_points = 4;
    g = build_graph(tie, 10, 0, opts);
    REQUIRE(g.valid_count() == 1);
    CHECK(g.sem(0, 5) == 1.0);  // tie -> lower class id
}

TEST_CASE("instances below min_points are skipped") {
    LabeledPointCloud cloud;
    append(cloud, instance_blob({0, 0, 0}, 1, 1, 10));
    append(cloud, instance_blob({5, 0, 0}, 2, 2, 3));  // below the default of 5
    const SemanticGraph g = build_graph(cloud, 10, 0);
    CHECK(g.valid_count() == 1);
    CHECK(g.sem(0, 1) == 1.0);
}

TEST_CASE("instance-0 points cluster into per-class voxel components") {
    LabeledPointCloud cloud;
    // Two well-separated blobs of the same stuff class, no instance ids.
    for (int i = 0; i < 12; ++i) {
        cloud.push_back({0.1 * i, 0, 0}, static_cast<std::uint16_t>(cls::kVegetation), 0);
        cloud.push_back({20.0 + 0.1 * i, 0, 0}, static_cast<std::uint16_t>(cls::kVegetation), 0);
    }
    const SemanticGraph g = build_graph(cloud, 10, 0);
    CHECK(g.valid_count() == 2);
    for (int s : g.valid_slots()) CHECK(g.sem(s, cls::kVegetation) == 1.0);
}

TEST_CASE("zero retained instances give an all-zero mask") {
    LabeledPointCloud cloud;
    cloud.push_back({0, 0, 0}, 1, 1);  // one point, below min_points
    const SemanticGraph g = build_graph(cloud, 8, 0);
    CHECK(g.valid_count() == 0);
    g.validate();
}
