#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "sgloop/common.hpp"

namespace sgloop {

using Vector6d = Eigen::Matrix<double, 6, 1>;

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

inline Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
    const double theta = w.norm();
    if (theta < 1e-12) {
        return Eigen::Matrix3d::Identity() + skew(w);
    }
    return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

inline Eigen::Vector3d so3_log(const Eigen::Matrix3d& R) {
    Eigen::AngleAxisd aa(R);
    return aa.angle() * aa.axis();
}

// Rigid transform; maps points from the local frame into the parent frame.
struct PoseSE3 {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static PoseSE3 identity() { return PoseSE3{}; }

    static PoseSE3 from_yaw(double yaw, const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
        PoseSE3 p;
        p.rotation = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
        p.translation = t;
        return p;
    }

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

    PoseSE3 inverse() const {
        PoseSE3 inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(inv.rotation * translation);
        return inv;
    }

    PoseSE3 operator*(const PoseSE3& rhs) const {
        PoseSE3 out;
        out.rotation = rotation * rhs.rotation;
        out.translation = rotation * rhs.translation + translation;
        return out;
    }

    double yaw() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

    // Invariant: R^T R = I to 1e-9 and det R = +1. Re-project after long update chains.
    bool is_orthonormal(double tol = 1e-9) const {
        const double err = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
                               .cwiseAbs()
                               .maxCoeff();
        return err <= tol && rotation.determinant() > 0.0;
    }

    void orthonormalize() {
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::Matrix3d u = svd.matrixU();
        Eigen::Matrix3d v = svd.matrixV();
        Eigen::Matrix3d r = u * v.transpose();
        if (r.determinant() < 0) {
            u.col(2) *= -1.0;
            r = u * v.transpose();
        }
        rotation = r;
    }
};

// Tangent convention: xi = [omega; rho], rotation block first.
inline PoseSE3 se3_exp(const Vector6d& xi) {
    const Eigen::Vector3d w = xi.head<3>();
    const Eigen::Vector3d rho = xi.tail<3>();
    const double theta = w.norm();
    const Eigen::Matrix3d wx = skew(w);
    Eigen::Matrix3d v_mat;
    if (theta < 1e-9) {
        v_mat = Eigen::Matrix3d::Identity() + 0.5 * wx + (1.0 / 6.0) * wx * wx;
    } else {
        const double t2 = theta * theta;
        v_mat = Eigen::Matrix3d::Identity() + ((1.0 - std::cos(theta)) / t2) * wx +
                ((theta - std::sin(theta)) / (t2 * theta)) * wx * wx;
    }
    PoseSE3 out;
    out.rotation = so3_exp(w);
    out.translation = v_mat * rho;
    return out;
}

inline Vector6d se3_log(const PoseSE3& T) {
    const Eigen::Vector3d w = so3_log(T.rotation);
    const double theta = w.norm();
    const Eigen::Matrix3d wx = skew(w);
    Eigen::Matrix3d v_inv;
    if (theta < 1e-9) {
        v_inv = Eigen::Matrix3d::Identity() - 0.5 * wx + (1.0 / 12.0) * wx * wx;
    } else {
        const double half = 0.5 * theta;
        const double coef = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
        v_inv = Eigen::Matrix3d::Identity() - 0.5 * wx + coef * wx * wx;
    }
    Vector6d xi;
    xi.head<3>() = w;
    xi.tail<3>() = v_inv * T.translation;
    return xi;
}

inline double rotation_angle(const Eigen::Matrix3d& R) { return Eigen::AngleAxisd(R).angle(); }

// Closed-form least-squares rigid alignment (no scale): minimizes
// sum_i || dst_i - (R src_i + t) ||^2.
inline PoseSE3 rigid_align(const std::vector<Eigen::Vector3d>& src,
                           const std::vector<Eigen::Vector3d>& dst) {
    if (src.size() != dst.size() || src.size() < 3) {
        throw DataError("rigid_align requires >= 3 matched points");
    }
    Eigen::MatrixXd s(3, static_cast<Eigen::Index>(src.size()));
    Eigen::MatrixXd d(3, static_cast<Eigen::Index>(dst.size()));
    for (std::size_t i = 0; i < src.size(); ++i) {
        s.col(static_cast<Eigen::Index>(i)) = src[i];
        d.col(static_cast<Eigen::Index>(i)) = dst[i];
    }
    const Eigen::Matrix4d m = Eigen::umeyama(s, d, false);
    PoseSE3 out;
    out.rotation = m.topLeftCorner<3, 3>();
    out.translation = m.topRightCorner<3, 1>();
    return out;
}

}  // namespace sgloop
