#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "sgloop/common.hpp"

namespace sgloop::ad {

using Mat = Eigen::MatrixXd;

// Reverse-mode autodiff over dense matrices. A Tape owns the computation graph;
// Var is an opaque handle. Ops record a pullback closure that scatters the output
// adjoint into the parents' adjoints; backward() replays them in reverse creation
// order, which is a valid topological order because ops only reference earlier vars.
struct Var {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Mat v) { return push(std::move(v), false); }
    Var param(Mat v) { return push(std::move(v), true); }

    const Mat& value(Var v) const { return node(v).value; }
    const Mat& grad(Var v) const { return node(v).grad; }

    Var add(Var a, Var b) {
        Var out = push(value(a) + value(b), needs(a) || needs(b));
        record(out, [this, a, b, out] {
            accumulate(a, node(out).grad);
            accumulate(b, node(out).grad);
        });
        return out;
    }

    Var sub(Var a, Var b) {
        Var out = push(value(a) - value(b), needs(a) || needs(b));
        record(out, [this, a, b, out] {
            accumulate(a, node(out).grad);
            accumulate(b, -node(out).grad);
        });
        return out;
    }

    Var mul(Var a, Var b) {  // elementwise
        Var out = push(value(a).cwiseProduct(value(b)), needs(a) || needs(b));
        record(out, [this, a, b, out] {
            accumulate(a, node(out).grad.cwiseProduct(value(b)));
            accumulate(b, node(out).grad.cwiseProduct(value(a)));
        });
        return out;
    }

    Var scale(Var a, double s) {
        Var out = push(value(a) * s, needs(a));
        record(out, [this, a, s, out] { accumulate(a, node(out).grad * s); });
        return out;
    }

    Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false) {
        const Mat& av = value(a);
        const Mat& bv = value(b);
        Mat v;
        if (!transpose_a && !transpose_b) v = av * bv;
        else if (transpose_a && !transpose_b) v = av.transpose() * bv;
        else if (!transpose_a && transpose_b) v = av * bv.transpose();
        else v = av.transpose() * bv.transpose();
        Var out = push(std::move(v), needs(a) || needs(b));
        record(out, [this, a, b, transpose_a, transpose_b, out] {
            const Mat& g = node(out).grad;
            const Mat& av2 = value(a);
            const Mat& bv2 = value(b);
            if (!transpose_a && !transpose_b) {
                accumulate(a, g * bv2.transpose());
                accumulate(b, av2.transpose() * g);
            } else if (transpose_a && !transpose_b) {
                accumulate(a, bv2 * g.transpose());
                accumulate(b, av2 * g);
            } else if (!transpose_a && transpose_b) {
                accumulate(a, g * bv2);
                accumulate(b, g.transpose() * av2);
            } else {
                accumulate(a, (g * bv2).transpose());
                accumulate(b, (av2 * g).transpose());
            }
        });
        return out;
    }

    Var transpose(Var a) {
        Var out = push(value(a).transpose(), needs(a));
        record(out, [this, a, out] { accumulate(a, node(out).grad.transpose()); });
        return out;
    }

    Var concat_cols(Var a, Var b) {
        const Mat& av = value(a);
        const Mat& bv = value(b);
        const auto ac = av.cols();
        Mat v(av.rows(), ac + bv.cols());
        v << av, bv;
        Var out = push(std::move(v), needs(a) || needs(b));
        record(out, [this, a, b, ac, out] {
            const Mat& g = node(out).grad;
            accumulate(a, g.leftCols(ac));
            accumulate(b, g.rightCols(g.cols() - ac));
        });
        return out;
    }

    Var concat_rows(Var a, Var b) {
        const Mat& av = value(a);
        const Mat& bv = value(b);
        const auto ar = av.rows();
        Mat v(ar + bv.rows(), av.cols());
        v << av, bv;
        Var out = push(std::move(v), needs(a) || needs(b));
        record(out, [this, a, b, ar, out] {
            const Mat& g = node(out).grad;
            accumulate(a, g.topRows(ar));
            accumulate(b, g.bottomRows(g.rows() - ar));
        });
        return out;
    }

    // Row gather; indices may repeat, so the pullback scatter-adds.
    Var gather_rows(Var a, std::vector<int> rows) {
        const Mat& av = value(a);
        Mat v(static_cast<Eigen::Index>(rows.size()), av.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) v.row(static_cast<Eigen::Index>(r)) = av.row(rows[r]);
        Var out = push(std::move(v), needs(a));
        record(out, [this, a, rows = std::move(rows), out] {
            const Mat& g = node(out).grad;
            Mat acc = Mat::Zero(value(a).rows(), value(a).cols());
            for (std::size_t r = 0; r < rows.size(); ++r) {
                acc.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
            }
            accumulate(a, acc);
        });
        return out;
    }

    // (n*k) x 1 column -> n x k, row i holding entries [i*k, i*k + k).
    Var reshape_rows(Var a, int k) {
        const Mat& av = value(a);
        assert(av.cols() == 1 && av.rows() % k == 0);
        const Eigen::Index n = av.rows() / k;
        Mat v(n, k);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int r = 0; r < k; ++r) v(i, r) = av(i * k + r, 0);
        }
        Var out = push(std::move(v), needs(a));
        record(out, [this, a, k, out] {
            const Mat& g = node(out).grad;
            Mat acc(g.rows() * k, 1);
            for (Eigen::Index i = 0; i < g.rows(); ++i) {
                for (int r = 0; r < k; ++r) acc(i * k + r, 0) = g(i, r);
            }
            accumulate(a, acc);
        });
        return out;
    }

    // out(i, :) = sum_r alpha(i, r) * feats(i*k + r, :), the attention-weighted
    // neighbor aggregation used by the GAT branches.
    Var segment_weighted_sum(Var alpha, Var feats, int k) {
        const Mat& aw = value(alpha);
        const Mat& fv = value(feats);
        assert(aw.cols() == k && fv.rows() == aw.rows() * k);
        Mat v = Mat::Zero(aw.rows(), fv.cols());
        for (Eigen::Index i = 0; i < aw.rows(); ++i) {
            for (int r = 0; r < k; ++r) v.row(i) += aw(i, r) * fv.row(i * k + r);
        }
        Var out = push(std::move(v), needs(alpha) || needs(feats));
        record(out, [this, alpha, feats, k, out] {
            const Mat& g = node(out).grad;
            const Mat& aw2 = value(alpha);
            const Mat& fv2 = value(feats);
            Mat ga = Mat::Zero(aw2.rows(), aw2.cols());
            Mat gf = Mat::Zero(fv2.rows(), fv2.cols());
            for (Eigen::Index i = 0; i < aw2.rows(); ++i) {
                for (int r = 0; r < k; ++r) {
                    ga(i, r) = g.row(i).dot(fv2.row(i * k + r));
                    gf.row(i * k + r) = aw2(i, r) * g.row(i);
                }
            }
            accumulate(alpha, ga);
            accumulate(feats, gf);
        });
        return out;
    }

    Var softmax_rows(Var a) {
        const Mat& av = value(a);
        Mat v(av.rows(), av.cols());
        for (Eigen::Index i = 0; i < av.rows(); ++i) {
            const double m = av.row(i).maxCoeff();
            Eigen::RowVectorXd e = (av.row(i).array() - m).exp();
            v.row(i) = e / e.sum();
        }
        Var out = push(std::move(v), needs(a));
        record(out, [this, a, out] {
            const Mat& y = node(out).value;
            const Mat& g = node(out).grad;
            Mat acc(y.rows(), y.cols());
            for (Eigen::Index i = 0; i < y.rows(); ++i) {
                const double dot = g.row(i).dot(y.row(i));
                acc.row(i) = y.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
            }
            accumulate(a, acc);
        });
        return out;
    }

    Var leaky_relu(Var a, double slope) {
        Var out = push(value(a).unaryExpr([slope](double x) { return x > 0 ? x : slope * x; }),
                       needs(a));
        record(out, [this, a, slope, out] {
            const Mat& x = value(a);
            const Mat& g = node(out).grad;
            accumulate(a, g.binaryExpr(x, [slope](double gv, double xv) {
                return xv > 0 ? gv : slope * gv;
            }));
        });
        return out;
    }

    Var relu(Var a) { return leaky_relu(a, 0.0); }

    Var elu(Var a) {
        Var out = push(value(a).unaryExpr([](double x) { return x > 0 ? x : std::expm1(x); }),
                       needs(a));
        record(out, [this, a, out] {
            const Mat& x = value(a);
            const Mat& g = node(out).grad;
            accumulate(a, g.binaryExpr(x, [](double gv, double xv) {
                return xv > 0 ? gv : gv * std::exp(xv);
            }));
        });
        return out;
    }

    Var sigmoid(Var a) {
        Var out = push(value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); }),
                       needs(a));
        record(out, [this, a, out] {
            const Mat& y = node(out).value;
            accumulate(a, node(out).grad.cwiseProduct(
                              y.unaryExpr([](double s) { return s * (1.0 - s); })));
        });
        return out;
    }

    Var tanh_(Var a) {
        Var out = push(value(a).unaryExpr([](double x) { return std::tanh(x); }), needs(a));
        record(out, [this, a, out] {
            const Mat& y = node(out).value;
            accumulate(a, node(out).grad.cwiseProduct(
                              y.unaryExpr([](double t) { return 1.0 - t * t; })));
        });
        return out;
    }

    Var abs_(Var a) {
        Var out = push(value(a).cwiseAbs(), needs(a));
        record(out, [this, a, out] {
            const Mat& x = value(a);
            accumulate(a, node(out).grad.binaryExpr(x, [](double gv, double xv) {
                return xv > 0 ? gv : (xv < 0 ? -gv : 0.0);
            }));
        });
        return out;
    }

    Var log_(Var a) {
        Var out = push(value(a).unaryExpr([](double x) { return std::log(x); }), needs(a));
        record(out, [this, a, out] {
            accumulate(a, node(out).grad.cwiseQuotient(value(a)));
        });
        return out;
    }

    // Gradient passes only strictly inside the clamp interval.
    Var clamp(Var a, double lo, double hi) {
        Var out = push(value(a).unaryExpr([lo, hi](double x) { return std::clamp(x, lo, hi); }),
                       needs(a));
        record(out, [this, a, lo, hi, out] {
            const Mat& x = value(a);
            accumulate(a, node(out).grad.binaryExpr(x, [lo, hi](double gv, double xv) {
                return (xv > lo && xv < hi) ? gv : 0.0;
            }));
        });
        return out;
    }

    Var mean_rows(Var a) {
        const Mat& av = value(a);
        Mat v = av.colwise().mean();
        Var out = push(std::move(v), needs(a));
        record(out, [this, a, out] {
            const Mat& g = node(out).grad;
            const Mat& av2 = value(a);
            Mat acc = g.replicate(av2.rows(), 1) / static_cast<double>(av2.rows());
            accumulate(a, acc);
        });
        return out;
    }

    Var sum_all(Var a) {
        Mat v(1, 1);
        v(0, 0) = value(a).sum();
        Var out = push(std::move(v), needs(a));
        record(out, [this, a, out] {
            accumulate(a, Mat::Constant(value(a).rows(), value(a).cols(), node(out).grad(0, 0)));
        });
        return out;
    }

    void backward(Var output) {
        if (node(output).value.size() != 1) {
            throw NumericalError("backward() requires a scalar output");
        }
        for (auto& n : nodes_) {
            if (n.requires_grad) n.grad.setZero(n.value.rows(), n.value.cols());
        }
        node_mut(output).grad = Mat::Ones(1, 1);
        for (int i = output.idx; i >= 0; --i) {
            auto& n = nodes_[static_cast<std::size_t>(i)];
            if (n.requires_grad && n.pullback) n.pullback();
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat value;
        Mat grad;
        bool requires_grad = false;
        std::function<void()> pullback;
    };

    std::vector<Node> nodes_;

    const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.idx)]; }
    Node& node_mut(Var v) { return nodes_[static_cast<std::size_t>(v.idx)]; }
    bool needs(Var v) const { return node(v).requires_grad; }

    Var push(Mat v, bool requires_grad) {
        Node n;
        n.value = std::move(v);
        n.requires_grad = requires_grad;
        if (requires_grad) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    void record(Var out, std::function<void()> fn) {
        if (node(out).requires_grad) node_mut(out).pullback = std::move(fn);
    }

    void accumulate(Var target, const Mat& g) {
        Node& n = node_mut(target);
        if (!n.requires_grad) return;
        n.grad += g;
    }
};

}  // namespace sgloop::ad
