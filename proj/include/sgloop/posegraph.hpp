#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <vector>

#include "sgloop/common.hpp"
#include "sgloop/geometry.hpp"

namespace sgloop {

using Trajectory = std::vector<PoseSE3>;

struct Factor {
    enum class Kind { odometry, loop };
    Kind kind = Kind::odometry;
    int i = 0;
    int j = 0;
    PoseSE3 measurement;  // relative pose: j expressed in frame i
    double weight = 1.0;  // information weight on the squared log-residual
    double fitness = 0.0; // registration fitness for loop factors
};

// Pose graph over SE(3) nodes; the first node is anchored. Optimization is
// Levenberg-Marquardt on r = Log(Z^-1 X_i^-1 X_j) with numeric factor Jacobians.
class PoseGraph {
public:
    static constexpr double kLoopWeightCap = 100.0;

    int add_node(const PoseSE3& pose) {
        nodes_.push_back(pose);
        return static_cast<int>(nodes_.size()) - 1;
    }

    // Odometry factors may append the next node (initialized by composing the
    // measurement); loop factors require both endpoints to exist. A duplicate
    // loop factor on the same (i, j) replaces the stored one only when its
    // fitness is lower.
    void add_factor(const Factor& factor_in) {
        Factor factor = factor_in;
        if (factor.i >= factor.j) throw DataError("factor requires i < j");
        if (factor.kind == Factor::Kind::odometry) {
            if (factor.j != factor.i + 1) {
                throw DataError("odometry factor must connect consecutive nodes");
            }
            if (nodes_.empty()) {
                if (factor.i != 0) throw DataError("odometry factor references a missing node");
                nodes_.push_back(PoseSE3::identity());
            }
            if (factor.i >= static_cast<int>(nodes_.size())) {
                throw DataError("odometry factor references a missing node");
            }
            if (factor.j == static_cast<int>(nodes_.size())) {
                nodes_.push_back(nodes_[static_cast<std::size_t>(factor.i)] *
                                 factor.measurement);
            }
        }
        if (factor.i < 0 || factor.j >= static_cast<int>(nodes_.size())) {
            throw DataError("factor references a missing node");
        }
        for (auto& existing : factors_) {
            if (existing.kind != factor.kind || existing.i != factor.i ||
                existing.j != factor.j) {
                continue;
            }
            if (factor.kind == Factor::Kind::loop) {
                if (factor.fitness < existing.fitness) existing = factor;
                return;
            }
            return;  // identical odometry edge kept once
        }
        factors_.push_back(factor);
    }

    const std::vector<PoseSE3>& nodes() const { return nodes_; }
    const std::vector<Factor>& factors() const { return factors_; }

    void set_node(int idx, const PoseSE3& pose) { nodes_.at(static_cast<std::size_t>(idx)) = pose; }

    double total_cost() const {
        double cost = 0.0;
        for (const auto& f : factors_) cost += f.weight * residual(f).squaredNorm();
        return cost;
    }

    // LM over all nodes but the anchor. Returns the optimized trajectory; the
    // accepted-step cost sequence is monotone non-increasing by construction.
    Trajectory optimize(int max_iterations = 50, std::vector<double>* cost_history = nullptr) {
        check_connected();
        const int n = static_cast<int>(nodes_.size());
        if (n <= 1 || factors_.empty()) return nodes_;
        const int dof = 6 * (n - 1);  // node 0 anchored

        double lambda = 1e-6;
        double cost = total_cost();
        if (cost_history) cost_history->push_back(cost);

        for (int iter = 0; iter < max_iterations; ++iter) {
            Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dof, dof);
            Eigen::VectorXd b = Eigen::VectorXd::Zero(dof);
            for (const auto& f : factors_) {
                const Vector6d r = residual(f);
                const Eigen::Matrix<double, 6, 6> ji = numeric_jacobian(f, true);
                const Eigen::Matrix<double, 6, 6> jj = numeric_jacobian(f, false);
                accumulate_block(h, b, f, r, ji, jj);
            }

            bool stepped = false;
            for (int attempt = 0; attempt < 8; ++attempt) {
                Eigen::MatrixXd damped = h;
                damped.diagonal() += lambda * damped.diagonal().cwiseMax(1e-12);
                Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
                const Eigen::VectorXd delta = ldlt.solve(-b);
                if (!delta.allFinite()) {
                    throw NumericalError("pose graph normal equations are singular");
                }
                std::vector<PoseSE3> backup = nodes_;
                for (int k = 1; k < n; ++k) {
                    const Vector6d d = delta.segment<6>(6 * (k - 1));
                    nodes_[static_cast<std::size_t>(k)] =
                        nodes_[static_cast<std::size_t>(k)] * se3_exp(d);
                    nodes_[static_cast<std::size_t>(k)].orthonormalize();
                }
                const double new_cost = total_cost();
                if (new_cost <= cost) {
                    const double improvement = cost - new_cost;
                    cost = new_cost;
                    if (cost_history) cost_history->push_back(cost);
                    lambda = std::max(lambda / 3.0, 1e-12);
                    stepped = true;
                    if (improvement < 1e-16 && delta.norm() < 1e-12) {
                        return nodes_;
                    }
                    break;
                }
                nodes_ = backup;
                lambda *= 10.0;
            }
            if (!stepped) break;
        }
        return nodes_;
    }

private:
    std::vector<PoseSE3> nodes_;
    std::vector<Factor> factors_;

    Vector6d residual(const Factor& f) const {
        const PoseSE3& xi = nodes_[static_cast<std::size_t>(f.i)];
        const PoseSE3& xj = nodes_[static_cast<std::size_t>(f.j)];
        return se3_log(f.measurement.inverse() * (xi.inverse() * xj));
    }

    // Central differences w.r.t. a right-multiplied increment on the chosen node.
    Eigen::Matrix<double, 6, 6> numeric_jacobian(const Factor& f, bool wrt_i) const {
        const double eps = 1e-7;
        Eigen::Matrix<double, 6, 6> jac;
        const PoseSE3& xi = nodes_[static_cast<std::size_t>(f.i)];
        const PoseSE3& xj = nodes_[static_cast<std::size_t>(f.j)];
        for (int m = 0; m < 6; ++m) {
            Vector6d d = Vector6d::Zero();
            d(m) = eps;
            PoseSE3 ip = wrt_i ? xi * se3_exp(d) : xi;
            PoseSE3 jp = wrt_i ? xj : xj * se3_exp(d);
            const Vector6d rp = se3_log(f.measurement.inverse() * (ip.inverse() * jp));
            d(m) = -eps;
            ip = wrt_i ? xi * se3_exp(d) : xi;
            jp = wrt_i ? xj : xj * se3_exp(d);
            const Vector6d rm = se3_log(f.measurement.inverse() * (ip.inverse() * jp));
            jac.col(m) = (rp - rm) / (2.0 * eps);
        }
        return jac;
    }

    void accumulate_block(Eigen::MatrixXd& h, Eigen::VectorXd& b, const Factor& f,
                          const Vector6d& r, const Eigen::Matrix<double, 6, 6>& ji,
                          const Eigen::Matrix<double, 6, 6>& jj) const {
        const int bi = 6 * (f.i - 1);
        const int bj = 6 * (f.j - 1);
        if (f.i > 0) {
            h.block<6, 6>(bi, bi) += f.weight * ji.transpose() * ji;
            b.segment<6>(bi) += f.weight * ji.transpose() * r;
        }
        if (f.j > 0) {
            h.block<6, 6>(bj, bj) += f.weight * jj.transpose() * jj;
            b.segment<6>(bj) += f.weight * jj.transpose() * r;
        }
        if (f.i > 0 && f.j > 0) {
            h.block<6, 6>(bi, bj) += f.weight * ji.transpose() * jj;
            h.block<6, 6>(bj, bi) += f.weight * jj.transpose() * ji;
        }
    }

    void check_connected() const {
        const int n = static_cast<int>(nodes_.size());
        if (n == 0) return;
        std::vector<int> parent(static_cast<std::size_t>(n));
        std::iota(parent.begin(), parent.end(), 0);
        std::function<int(int)> find = [&](int x) {
            while (parent[static_cast<std::size_t>(x)] != x) {
                x = parent[static_cast<std::size_t>(x)] =
                    parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            }
            return x;
        };
        for (const auto& f : factors_) {
            parent[static_cast<std::size_t>(find(f.i))] = find(f.j);
        }
        std::vector<std::vector<int>> components;
        std::map<int, std::size_t> roots;
        for (int k = 0; k < n; ++k) {
            const int r = find(k);
            auto [it, inserted] = roots.try_emplace(r, components.size());
            if (inserted) components.emplace_back();
            components[it->second].push_back(k);
        }
        if (components.size() > 1) {
            std::ostringstream ss;
            ss << "pose graph is disconnected into " << components.size() << " components:";
            for (const auto& comp : components) {
                ss << " [" << comp.front() << ".." << comp.back() << " size " << comp.size()
                   << "]";
            }
            throw DataError(ss.str());
        }
    }
};

// Loop factors are weighted by inverse registration fitness (capped) so poor
// registrations pull less.
inline Factor make_loop_factor(int i, int j, const PoseSE3& measurement, double fitness) {
    Factor f;
    f.kind = Factor::Kind::loop;
    f.i = i;
    f.j = j;
    f.measurement = measurement;
    f.fitness = fitness;
    f.weight = std::min(PoseGraph::kLoopWeightCap, 1.0 / std::max(fitness, 1e-6));
    return f;
}

// Root-mean-square translational error after closed-form rigid alignment of the
// estimate onto ground truth (alignment skipped when align = false).
inline double ate(const Trajectory& estimated, const Trajectory& ground_truth,
                  bool align = true) {
    if (estimated.size() != ground_truth.size()) {
        throw DataError("ate requires trajectories of equal length");
    }
    if (estimated.empty()) throw DataError("ate over empty trajectories");

    PoseSE3 s = PoseSE3::identity();
    if (align && estimated.size() >= 3) {
        std::vector<Eigen::Vector3d> src, dst;
        for (std::size_t i = 0; i < estimated.size(); ++i) {
            src.push_back(estimated[i].translation);
            dst.push_back(ground_truth[i].translation);
        }
        s = rigid_align(src, dst);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < estimated.size(); ++i) {
        const Eigen::Vector3d err = s.apply(estimated[i].translation) -
                                    ground_truth[i].translation;
        sum += err.squaredNorm();
    }
    return std::sqrt(sum / static_cast<double>(estimated.size()));
}

}  // namespace sgloop
