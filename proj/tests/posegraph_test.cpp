#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sgloop/posegraph.hpp"
#include "test_util.hpp"

using namespace sgloop;

namespace {

Factor odo(int i, int j, const PoseSE3& z, double w = 1.0) {
    Factor f;
    f.kind = Factor::Kind::odometry;
    f.i = i;
    f.j = j;
    f.measurement = z;
    f.weight = w;
    return f;
}

double pose_distance(const PoseSE3& a, const PoseSE3& b) {
    return (a.translation - b.translation).norm() +
           rotation_angle(a.rotation.transpose() * b.rotation);
}

}  // namespace

TEST_CASE("add_factor grows the chain and deduplicates") {
    PoseGraph g;
    g.add_factor(odo(0, 1, PoseSE3::from_yaw(0.1, {1, 0, 0})));
    CHECK(g.nodes().size() == 2);  // empty graph + first odometry factor
    CHECK(g.factors().size() == 1);

    g.add_factor(odo(0, 1, PoseSE3::from_yaw(0.1, {1, 0, 0})));
    CHECK(g.factors().size() == 1);  // identical duplicate kept once

    g.add_factor(odo(1, 2, PoseSE3::from_yaw(0.0, {1, 0, 0})));
    CHECK(g.nodes().size() == 3);

    SECTION("loop factor insertion leaves the node count unchanged") {
        const auto nodes_before = g.nodes().size();
        g.add_factor(make_loop_factor(0, 2, PoseSE3::from_yaw(0.1, {2, 0, 0}), 0.05));
        CHECK(g.nodes().size() == nodes_before);
        CHECK(g.factors().size() == 3);
    }

    SECTION("duplicate loop factor replaced only when fitness improves") {
        g.add_factor(make_loop_factor(0, 2, PoseSE3::from_yaw(0.1, {2, 0, 0}), 0.2));
        g.add_factor(make_loop_factor(0, 2, PoseSE3::from_yaw(0.2, {2.5, 0, 0}), 0.5));
        REQUIRE(g.factors().size() == 3);
        CHECK(g.factors().back().fitness == 0.2);  // worse fitness ignored

        g.add_factor(make_loop_factor(0, 2, PoseSE3::from_yaw(0.05, {1.9, 0, 0}), 0.01));
        CHECK(g.factors().back().fitness == 0.01);  // better fitness replaces
    }

    SECTION("malformed factors are rejected") {
        CHECK_THROWS_AS(g.add_factor(odo(2, 2, PoseSE3::identity())), DataError);
        CHECK_THROWS_AS(g.add_factor(odo(0, 2, PoseSE3::identity())), DataError);
        Factor loop = make_loop_factor(0, 99, PoseSE3::identity(), 0.1);
        CHECK_THROWS_AS(g.add_factor(loop), DataError);
    }
}

TEST_CASE("chain with exact measurements recovers ground truth to 1e-9") {
    PoseGraph g;
    std::vector<PoseSE3> gt{PoseSE3::identity()};
    Rng rng = make_rng(3);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int k = 1; k <= 8; ++k) {
        gt.push_back(gt.back() * PoseSE3::from_yaw(u(rng), {1.0 + u(rng), u(rng), 0}));
        g.add_factor(odo(k - 1, k, gt[static_cast<std::size_t>(k) - 1].inverse() *
                                       gt[static_cast<std::size_t>(k)]));
    }
    const Trajectory opt = g.optimize(30);
    REQUIRE(opt.size() == gt.size());
    for (std::size_t k = 0; k < gt.size(); ++k) {
        CHECK(pose_distance(opt[k], gt[k]) < 1e-9);
    }
}

TEST_CASE("square loop with drifted last edge: loop factor fixes the endpoint") {
    // Ground truth: walk a 10 m square back to the start.
    const std::vector<PoseSE3> gt = {
        PoseSE3::identity(),
        PoseSE3::from_yaw(M_PI / 2, {10, 0, 0}),
        PoseSE3::from_yaw(M_PI, {10, 10, 0}),
        PoseSE3::from_yaw(-M_PI / 2, {0, 10, 0}),
        PoseSE3::from_yaw(0, {0, 0, 0}),
    };
    auto rel = [&gt](int i, int j) {
        return gt[static_cast<std::size_t>(i)].inverse() * gt[static_cast<std::size_t>(j)];
    };
    const PoseSE3 drift = PoseSE3::from_yaw(0.06, {0.8, -0.4, 0});

    PoseGraph plain;
    for (int k = 0; k < 4; ++k) {
        PoseSE3 meas = rel(k, k + 1);
        if (k == 3) meas = meas * drift;  // drift on the final odometry edge
        plain.add_factor(odo(k, k + 1, meas));
    }
    const double unoptimized_error =
        (plain.nodes().back().translation - gt.back().translation).norm();
    REQUIRE(unoptimized_error > 0.5);

    PoseGraph with_loop = plain;
    with_loop.add_factor(make_loop_factor(0, 4, rel(0, 4), 0.01));  // exact loop closure
    const Trajectory opt = with_loop.optimize(50);
    const double optimized_error = (opt.back().translation - gt.back().translation).norm();

    CHECK(optimized_error * 10.0 <= unoptimized_error);

    SECTION("objective is monotone non-increasing over accepted steps") {
        PoseGraph again = plain;
        again.add_factor(make_loop_factor(0, 4, rel(0, 4), 0.01));
        std::vector<double> history;
        again.optimize(50, &history);
        for (std::size_t i = 1; i < history.size(); ++i) {
            CHECK(history[i] <= history[i - 1] + 1e-12);
        }
    }
}

TEST_CASE("optimizing an already-optimal graph moves nothing") {
    PoseGraph g;
    g.add_factor(odo(0, 1, PoseSE3::from_yaw(0.2, {1, 0.5, 0})));
    g.add_factor(odo(1, 2, PoseSE3::from_yaw(-0.1, {1, -0.2, 0})));
    const Trajectory before = g.nodes();
    const Trajectory after = g.optimize(20);
    for (std::size_t k = 0; k < before.size(); ++k) {
        CHECK(pose_distance(before[k], after[k]) <= 1e-9);
    }
}

TEST_CASE("anchored node never moves") {
    PoseGraph g;
    const PoseSE3 anchor = PoseSE3::from_yaw(0.7, {3, -2, 1});
    g.add_node(anchor);
    g.add_factor(odo(0, 1, PoseSE3::from_yaw(0.1, {1, 0, 0})));
    g.add_factor(odo(1, 2, PoseSE3::from_yaw(0.1, {1, 0, 0})));
    g.add_factor(make_loop_factor(0, 2, PoseSE3::from_yaw(0.15, {2.2, 0.1, 0}), 0.1));
    const Trajectory opt = g.optimize(30);
    CHECK(pose_distance(opt[0], anchor) == 0.0);
}

TEST_CASE("disconnected graphs fail naming the components") {
    PoseGraph g;
    g.add_node(PoseSE3::identity());
    g.add_node(PoseSE3::identity());
    g.add_node(PoseSE3::identity());
    g.add_factor(make_loop_factor(0, 1, PoseSE3::identity(), 0.1));
    // node 2 is isolated
    CHECK_THROWS_WITH(g.optimize(5), Catch::Matchers::ContainsSubstring("disconnected"));
}

TEST_CASE("ate basics") {
    std::vector<PoseSE3> traj;
    for (int i = 0; i < 6; ++i) {
        traj.push_back(PoseSE3::from_yaw(0.3 * i, {2.0 * i, std::sin(i * 0.8), 0}));
    }

    SECTION("identical trajectories give zero") {
        CHECK(ate(traj, traj) == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("a constant rigid shift is absorbed by the alignment") {
        const PoseSE3 shift = PoseSE3::from_yaw(0.9, {5, -3, 2});
        std::vector<PoseSE3> moved;
        for (const auto& p : traj) moved.push_back(shift * p);
        CHECK(ate(moved, traj) == Catch::Approx(0.0).margin(1e-9));
        CHECK(ate(moved, traj, false) > 1.0);  // without alignment the shift shows
    }

    SECTION("forced identity alignment: one pose off by 1 m in 4 -> 0.5") {
        std::vector<PoseSE3> gt(4, PoseSE3::identity());
        for (int i = 0; i < 4; ++i) gt[static_cast<std::size_t>(i)].translation.x() = i;
        std::vector<PoseSE3> est = gt;
        est[2].translation.y() += 1.0;
        CHECK(ate(est, gt, false) == Catch::Approx(0.5).margin(1e-12));
    }

    SECTION("length mismatch is an error") {
        std::vector<PoseSE3> shorter(traj.begin(), traj.end() - 1);
        CHECK_THROWS_AS(ate(shorter, traj), DataError);
    }
}
