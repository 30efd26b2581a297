#include <catch2/catch_amalgamated.hpp>

#include <functional>

#include "sgloop/autodiff.hpp"
#include "test_util.hpp"

using namespace sgloop;
using ad::Mat;

namespace {

Mat random_mat(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = u(rng);
    }
    return m;
}

// Central-difference check of d(scalar expr)/d(leaf) for one leaf matrix.
// The expression builder runs on a fresh tape per evaluation.
double fd_check(const std::vector<Mat>& leaves,
                const std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>& build,
                std::size_t which) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& leaf : leaves) vars.push_back(tape.param(leaf));
    ad::Var out = build(tape, vars);
    tape.backward(out);
    const Mat analytic = tape.grad(vars[which]);

    const double eps = 1e-6;
    Mat numeric(leaves[which].rows(), leaves[which].cols());
    for (int r = 0; r < numeric.rows(); ++r) {
        for (int c = 0; c < numeric.cols(); ++c) {
            auto eval = [&](double delta) {
                std::vector<Mat> perturbed = leaves;
                perturbed[which](r, c) += delta;
                ad::Tape t2;
                std::vector<ad::Var> v2;
                for (const auto& leaf : perturbed) v2.push_back(t2.constant(leaf));
                return t2.value(build(t2, v2))(0, 0);
            };
            numeric(r, c) = (eval(eps) - eval(-eps)) / (2 * eps);
        }
    }
    return test_util::gradient_rel_error(analytic, numeric);
}

}  // namespace

TEST_CASE("elementwise and matmul ops match finite differences") {
    const std::vector<Mat> leaves = {random_mat(3, 4, 1), random_mat(4, 2, 2),
                                     random_mat(3, 2, 3)};
    auto build = [](ad::Tape& t, const std::vector<ad::Var>& v) {
        ad::Var prod = t.matmul(v[0], v[1]);           // 3x2
        ad::Var mixed = t.mul(prod, v[2]);             // elementwise
        ad::Var shifted = t.add(mixed, t.scale(v[2], 0.5));
        return t.sum_all(t.tanh_(shifted));
    };
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        CHECK(fd_check(leaves, build, i) < 1e-8);
    }
}

TEST_CASE("transposed matmul variants match finite differences") {
    const std::vector<Mat> leaves = {random_mat(4, 3, 4), random_mat(4, 2, 5)};
    auto build_tn = [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return t.sum_all(t.matmul(v[0], v[1], true, false));  // (3x4)(4x2)
    };
    auto build_nt = [](ad::Tape& t, const std::vector<ad::Var>& v) {
        return t.sum_all(t.sigmoid(t.matmul(v[1], v[0], true, false)));  // (2x4)(4x3)
    };
    CHECK(fd_check(leaves, build_tn, 0) < 1e-8);
    CHECK(fd_check(leaves, build_tn, 1) < 1e-8);
    CHECK(fd_check(leaves, build_nt, 0) < 1e-8);
    CHECK(fd_check(leaves, build_nt, 1) < 1e-8);
}

TEST_CASE("softmax_rows matches finite differences and normalizes") {
    const std::vector<Mat> leaves = {random_mat(5, 4, 6, 2.0)};
    auto build = [](ad::Tape& t, const std::vector<ad::Var>& v) {
        ad::Var sm = t.softmax_rows(v[0]);
        ad::Var weights = t.constant(random_mat(5, 4, 99));
        return t.sum_all(t.mul(sm, weights));
    };
    CHECK(fd_check(leaves, build, 0) < 1e-8);

    ad::Tape t;
    ad::Var sm = t.softmax_rows(t.constant(leaves[0]));
    for (int r = 0; r < 5; ++r) {
        CHECK(t.value(sm).row(r).sum() == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("gather, reshape and segment ops match finite differences") {
    const std::vector<Mat> leaves = {random_mat(4, 3, 7), random_mat(8, 1, 8, 2.0)};
    auto build = [](ad::Tape& t, const std::vector<ad::Var>& v) {
        // gather with repeats, then a grouped softmax aggregation
        ad::Var gathered = t.gather_rows(v[0], {0, 2, 2, 1, 3, 0});  // 6x3
        ad::Var alpha = t.softmax_rows(t.reshape_rows(v[1], 4));     // 2x4
        ad::Var feats = t.gather_rows(gathered, {0, 1, 2, 3, 4, 5, 0, 1});  // 8x3
        ad::Var agg = t.segment_weighted_sum(alpha, feats, 4);       // 2x3
        return t.sum_all(t.elu(agg));
    };
    CHECK(fd_check(leaves, build, 0) < 1e-8);
    CHECK(fd_check(leaves, build, 1) < 1e-8);
}

TEST_CASE("activation and shape ops match finite differences") {
    const std::vector<Mat> leaves = {random_mat(3, 3, 9), random_mat(3, 3, 10)};
    auto build = [](ad::Tape& t, const std::vector<ad::Var>& v) {
        ad::Var x = t.concat_cols(t.leaky_relu(v[0], 0.2), t.elu(v[1]));  // 3x6
        ad::Var y = t.concat_rows(x, x);                                   // 6x6
        ad::Var z = t.abs_(t.sub(y, t.scale(y, 0.25)));
        ad::Var w = t.log_(t.add(t.sigmoid(z), t.constant(Mat::Constant(6, 6, 0.5))));
        return t.sum_all(t.mean_rows(w));
    };
    CHECK(fd_check(leaves, build, 0) < 1e-7);
    CHECK(fd_check(leaves, build, 1) < 1e-7);
}

TEST_CASE("clamp passes gradient only strictly inside the interval") {
    ad::Tape t;
    Mat x(1, 3);
    x << 0.5, 1.5, -0.5;
    ad::Var xv = t.param(x);
    ad::Var out = t.sum_all(t.clamp(xv, 0.0, 1.0));
    t.backward(out);
    CHECK(t.grad(xv)(0, 0) == 1.0);
    CHECK(t.grad(xv)(0, 1) == 0.0);
    CHECK(t.grad(xv)(0, 2) == 0.0);
}

TEST_CASE("constants receive no gradient and a deep chain stays exact") {
    const std::vector<Mat> leaves = {random_mat(2, 6, 11), random_mat(4, 6, 12),
                                     random_mat(1, 4, 13)};
    auto build = [](ad::Tape& t, const std::vector<ad::Var>& v) {
        ad::Var h = t.elu(t.matmul(v[0], v[1], false, true));  // 2x4
        ad::Var s = t.softmax_rows(h);
        ad::Var o = t.matmul(s, v[2], false, true);  // 2x1
        return t.sum_all(t.sigmoid(o));
    };
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        CHECK(fd_check(leaves, build, i) < 1e-8);
    }

    ad::Tape t;
    ad::Var c = t.constant(random_mat(2, 2, 14));
    ad::Var p = t.param(random_mat(2, 2, 15));
    t.backward(t.sum_all(t.mul(c, p)));
    CHECK(t.grad(c).size() == 0);  // constants carry no gradient buffer
    CHECK(t.grad(p).size() == 4);
}
