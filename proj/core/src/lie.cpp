#include "crest/lie.hpp"

#include <Eigen/Geometry>
#include <cmath>

namespace crest {

namespace {
constexpr double kSmallAngle = 1e-7;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

double Pose::orthonormality_defect() const {
  double d = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return d + std::abs(rotation.determinant() - 1.0);
}

Mat3 hat3(const Vec3& v) {
  Mat3 m;
  // clang-format off
  m <<     0, -v.z(),  v.y(),
       v.z(),      0, -v.x(),
      -v.y(),  v.x(),      0;
  // clang-format on
  return m;
}

Mat4 hat4(const Twist& xi) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = hat3(xi.tail<3>());
  m.topRightCorner<3, 1>() = xi.head<3>();
  return m;
}

Mat6 curlyhat(const Twist& xi) {
  Mat6 m = Mat6::Zero();
  m.topLeftCorner<3, 3>() = hat3(xi.tail<3>());
  m.topRightCorner<3, 3>() = hat3(xi.head<3>());
  m.bottomRightCorner<3, 3>() = m.topLeftCorner<3, 3>();
  return m;
}

Mat3 exp_so3(const Vec3& phi) {
  const double th2 = phi.squaredNorm();
  const Mat3 w = hat3(phi);
  double a, b;  // R = I + a*w + b*w^2
  if (th2 < kSmallAngle * kSmallAngle) {
    a = 1.0 - th2 / 6.0 + th2 * th2 / 120.0;
    b = 0.5 - th2 / 24.0 + th2 * th2 / 720.0;
  } else {
    const double th = std::sqrt(th2);
    a = std::sin(th) / th;
    b = (1.0 - std::cos(th)) / th2;
  }
  return Mat3::Identity() + a * w + b * w * w;
}

Vec3 log_so3(const Mat3& rotation) {
  // Quaternion-backed axis-angle stays accurate for angles approaching pi.
  Eigen::AngleAxisd aa(rotation);
  const double angle = aa.angle();
  if (angle >= kPi - 1e-6) throw AngleNearPi(angle);
  return angle * aa.axis();
}

Mat3 left_jacobian_so3(const Vec3& phi) {
  const double th2 = phi.squaredNorm();
  const Mat3 w = hat3(phi);
  double b, c;  // J = I + b*w + c*w^2
  if (th2 < kSmallAngle * kSmallAngle) {
    b = 0.5 - th2 / 24.0 + th2 * th2 / 720.0;
    c = 1.0 / 6.0 - th2 / 120.0 + th2 * th2 / 5040.0;
  } else {
    const double th = std::sqrt(th2);
    b = (1.0 - std::cos(th)) / th2;
    c = (th - std::sin(th)) / (th2 * th);
  }
  return Mat3::Identity() + b * w + c * w * w;
}

Mat3 left_jacobian_inv_so3(const Vec3& phi) {
  const double th2 = phi.squaredNorm();
  const Mat3 w = hat3(phi);
  double d;  // Jinv = I - w/2 + d*w^2
  if (th2 < kSmallAngle * kSmallAngle) {
    d = 1.0 / 12.0 + th2 / 720.0 + th2 * th2 / 30240.0;
  } else {
    const double th = std::sqrt(th2);
    d = 1.0 / th2 - (1.0 + std::cos(th)) / (2.0 * th * std::sin(th));
  }
  return Mat3::Identity() - 0.5 * w + d * w * w;
}

namespace {

// Barfoot's Q matrix: the top-right block of the SE(3) left Jacobian.
Mat3 q_block(const Twist& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  const double th2 = phi.squaredNorm();
  double m2, m3, m4;
  if (th2 < 1e-6) {
    m2 = 1.0 / 6.0 - th2 / 120.0 + th2 * th2 / 5040.0;
    m3 = -1.0 / 24.0 + th2 / 720.0 - th2 * th2 / 40320.0;
    m4 = -1.0 / 120.0 + th2 / 2520.0;
  } else {
    const double th = std::sqrt(th2);
    const double th4 = th2 * th2;
    const double c = std::cos(th), s = std::sin(th);
    m2 = (th - s) / (th2 * th);
    m3 = (1.0 - 0.5 * th2 - c) / th4;
    m4 = 0.5 * (m3 - 3.0 * (th - s - th2 * th / 6.0) / (th4 * th));
  }
  const Mat3 rx = hat3(rho);
  const Mat3 px = hat3(phi);
  const Mat3 pxrx = px * rx;
  const Mat3 rxpx = rx * px;
  const Mat3 pxpx = px * px;
  return 0.5 * rx + m2 * (pxrx + rxpx + px * rxpx) -
         m3 * (pxpx * rx + rx * pxpx - 3.0 * px * rxpx) -
         m4 * (pxrx * pxpx + pxpx * rxpx);
}

}  // namespace

Pose exp_se3(const Twist& xi) {
  Pose out;
  out.rotation = exp_so3(xi.tail<3>());
  out.translation = left_jacobian_so3(xi.tail<3>()) * xi.head<3>();
  return out;
}

Twist log_se3(const Pose& pose) {
  Twist xi;
  xi.tail<3>() = log_so3(pose.rotation);
  xi.head<3>() = left_jacobian_inv_so3(xi.tail<3>()) * pose.translation;
  return xi;
}

Mat6 left_jacobian(const Twist& xi) {
  const Mat3 j = left_jacobian_so3(xi.tail<3>());
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = j;
  out.topRightCorner<3, 3>() = q_block(xi);
  out.bottomRightCorner<3, 3>() = j;
  return out;
}

Mat6 left_jacobian_inv(const Twist& xi) {
  const double th = xi.tail<3>().norm();
  if (th >= kPi - 1e-6) throw AngleNearPi(th);
  const Mat3 ji = left_jacobian_inv_so3(xi.tail<3>());
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = ji;
  out.topRightCorner<3, 3>() = -ji * q_block(xi) * ji;
  out.bottomRightCorner<3, 3>() = ji;
  return out;
}

Mat6 adjoint(const Pose& pose) {
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = pose.rotation;
  out.topRightCorner<3, 3>() = hat3(pose.translation) * pose.rotation;
  out.bottomRightCorner<3, 3>() = pose.rotation;
  return out;
}

Mat6 dleft_jacobian_times(const Twist& xi, const Twist& v) {
  // J_l(xi) = sum_n ad(xi)^n / (n+1)!.  Differentiating term-by-term and
  // using ad(d) u = -ad(u) d gives
  //   M = -sum_{n>=1} 1/(n+1)! * S_n,   S_n = sum_j A^j ad(A^{n-1-j} v),
  // with the recursion S_{n+1} = A S_n + ad(A^n v).
  const Mat6 a = curlyhat(xi);
  Mat6 s = Mat6::Zero();
  Twist u = v;
  Mat6 acc = Mat6::Zero();
  double fact = 1.0;
  for (int n = 1; n <= 60; ++n) {
    s = a * s + curlyhat(u);
    u = a * u;
    fact *= static_cast<double>(n + 1);
    const Mat6 term = s / fact;
    acc += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18 && n > 4) break;
  }
  return -acc;
}

Mat6 dleft_jacobian_inv_times(const Twist& xi, const Twist& w) {
  const Mat6 ji = left_jacobian_inv(xi);
  return -ji * dleft_jacobian_times(xi, ji * w);
}

}  // namespace crest
