#pragma once

// SE(3) / se(3) operations used by every factor, retraction and interpolation.
//
// Conventions (fixed project-wide):
//  * Twist ordering is [translational(3); rotational(3)].
//  * Pose perturbations are applied on the left: T <- exp(delta) * T.
//  * exp/log small-angle branches switch to 4th-order series below 1e-7 rad.
//  * Rotation angles within 1e-6 of pi raise AngleNearPi instead of returning
//    a best-effort result; inter-node increments never get close to pi in
//    intended use.

#include <Eigen/Core>

#include "crest/errors.hpp"

namespace crest {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Twist = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

/// Rigid transform stored as a rotation matrix plus translation vector.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose Identity() { return Pose{}; }

  Pose operator*(const Pose& rhs) const {
    return Pose{rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  Pose inverse() const {
    Mat3 rt = rotation.transpose();
    return Pose{rt, -(rt * translation)};
  }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  static Pose from_matrix(const Mat4& m) {
    return Pose{m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
  }

  /// Max deviation of rotation^T rotation from I plus |det - 1|.
  double orthonormality_defect() const;
};

/// 3x3 skew-symmetric matrix such that hat3(a) * b = a x b.
Mat3 hat3(const Vec3& v);

/// 4x4 lift of a twist, [[hat3(rot), trans], [0, 0]].
Mat4 hat4(const Twist& xi);

/// se(3) adjoint ("curly hat"): ad(xi) = [[rot^, trans^], [0, rot^]].
Mat6 curlyhat(const Twist& xi);

/// SO(3) exponential (Rodrigues with small-angle series).
Mat3 exp_so3(const Vec3& phi);

/// SO(3) logarithm. Throws AngleNearPi within 1e-6 of pi.
Vec3 log_so3(const Mat3& rotation);

Mat3 left_jacobian_so3(const Vec3& phi);
Mat3 left_jacobian_inv_so3(const Vec3& phi);

/// SE(3) exponential map of the 4x4 lift of xi. Total function.
Pose exp_se3(const Twist& xi);

/// SE(3) logarithm; exp_se3(log_se3(T)) == T to 1e-10 away from pi.
Twist log_se3(const Pose& pose);

/// SE(3) left Jacobian, [[J_so3, Q], [0, J_so3]].
Mat6 left_jacobian(const Twist& xi);

/// Inverse of the SE(3) left Jacobian; identity at xi = 0.
Mat6 left_jacobian_inv(const Twist& xi);

/// Adjoint of a pose: Ad(T) = [[R, t^ R], [0, R]], so that
/// T * exp(xi) * T^{-1} = exp(Ad(T) xi).
Mat6 adjoint(const Pose& pose);

/// Directional-derivative matrix M with M * d = (dJ_l(xi)[d]) * v, evaluated
/// by the convergent series of the left Jacobian. Exact to machine precision
/// for |rot(xi)| < pi; used for the velocity rows of prior and measurement
/// factor Jacobians.
Mat6 dleft_jacobian_times(const Twist& xi, const Twist& v);

/// Directional-derivative matrix of J_l^{-1}(xi) * w with respect to xi.
Mat6 dleft_jacobian_inv_times(const Twist& xi, const Twist& w);

}  // namespace crest
