#include "crest/interp.hpp"

#include <Eigen/Cholesky>

#include "crest/errors.hpp"

namespace crest {

namespace {

Mat12 transition(double dt) {
  Mat12 phi = Mat12::Identity();
  phi.topRightCorner<6, 6>() = dt * Mat6::Identity();
  return phi;
}

Mat12 process_noise(double dt, const Mat6& qc) {
  Mat12 q;
  q.topLeftCorner<6, 6>() = dt * dt * dt / 3.0 * qc;
  q.topRightCorner<6, 6>() = dt * dt / 2.0 * qc;
  q.bottomLeftCorner<6, 6>() = q.topRightCorner<6, 6>();
  q.bottomRightCorner<6, 6>() = dt * qc;
  return q;
}

}  // namespace

Mat24 JointNeighborCovariance::joint_block(int j) const {
  if (j < 0 || j >= nodes) throw IndexOutOfWindow("joint covariance node index");
  const int half = kNodeDim * nodes;
  const int oa = kNodeDim * j;
  const int ob = half + kNodeDim * j;
  Mat24 out;
  out.topLeftCorner<12, 12>() = cov.block<12, 12>(oa, oa);
  out.topRightCorner<12, 12>() = cov.block<12, 12>(oa, ob);
  out.bottomLeftCorner<12, 12>() = cov.block<12, 12>(ob, oa);
  out.bottomRightCorner<12, 12>() = cov.block<12, 12>(ob, ob);
  return out;
}

InterpOperators interp_operators(double t_a, double t_b, double tau, const Mat6& qc) {
  if (!(t_a < t_b) || tau < t_a || tau > t_b) {
    throw TimestampOutsideInterval(tau, t_a, t_b);
  }
  InterpOperators ops;
  if (tau == t_a) {
    // Degenerate left endpoint: conditioning is the identity.
    return ops;
  }
  const Mat12 q_tau = process_noise(tau - t_a, qc);
  const Mat12 q_ab = process_noise(t_b - t_a, qc);
  const Mat12 phi_b_tau = transition(t_b - tau);
  ops.psi = q_tau * phi_b_tau.transpose() * q_ab.ldlt().solve(Mat12::Identity());
  ops.lambda = transition(tau - t_a) - ops.psi * transition(t_b - t_a);
  ops.q_local = q_tau - ops.psi * phi_b_tau * q_tau;
  ops.q_local = 0.5 * (ops.q_local + ops.q_local.transpose()).eval();
  return ops;
}

namespace {

struct LocalInterp {
  Twist gamma;       // log(T_b T_a^{-1})
  Vec12 z_tau;       // interpolated local [xi; xidot]
  Mat12 lambda, psi;
};

LocalInterp local_interp(const NodeState& xa, double t_a, const NodeState& xb, double t_b,
                         double tau) {
  LocalInterp li;
  li.gamma = log_se3(xb.pose * xa.pose.inverse());
  const InterpOperators ops = interp_operators(t_a, t_b, tau, Mat6::Identity());
  li.lambda = ops.lambda;
  li.psi = ops.psi;
  Vec12 za = Vec12::Zero();
  za.tail<6>() = xa.velocity;
  Vec12 zb;
  zb.head<6>() = li.gamma;
  zb.tail<6>() = left_jacobian_inv(li.gamma) * xb.velocity;
  li.z_tau = ops.lambda * za + ops.psi * zb;
  return li;
}

}  // namespace

NodeState interp_mean(const NodeState& xa, double t_a, const NodeState& xb, double t_b,
                      double tau) {
  const LocalInterp li = local_interp(xa, t_a, xb, t_b, tau);
  const Twist xi_p = li.z_tau.head<6>();
  NodeState out;
  out.pose = exp_se3(xi_p) * xa.pose;
  out.velocity = left_jacobian(xi_p) * li.z_tau.tail<6>();
  const double alpha = (tau - t_a) / (t_b - t_a);
  out.strain = (1.0 - alpha) * xa.strain + alpha * xb.strain;
  return out;
}

InterpMeanJacobians interp_mean_jacobians(const NodeState& xa, double t_a,
                                          const NodeState& xb, double t_b, double tau) {
  const LocalInterp li = local_interp(xa, t_a, xb, t_b, tau);
  const Twist xi_p = li.z_tau.head<6>();
  const Mat6 jl_xi = left_jacobian(xi_p);

  InterpMeanJacobians out;
  out.pose = exp_se3(xi_p) * xa.pose;
  out.velocity = jl_xi * li.z_tau.tail<6>();

  // Columns: [dT_a(6), dv_a(6), dT_b(6), dv_b(6)].
  const Mat6 jinv = left_jacobian_inv(li.gamma);
  Eigen::Matrix<double, 6, 24> dgamma = Eigen::Matrix<double, 6, 24>::Zero();
  dgamma.leftCols<6>() = -jinv * adjoint(xb.pose * xa.pose.inverse());
  dgamma.middleCols<6>(12) = jinv;

  const Mat6 dvel = dleft_jacobian_inv_times(li.gamma, xb.velocity);
  Eigen::Matrix<double, 12, 24> dzb = Eigen::Matrix<double, 12, 24>::Zero();
  dzb.topRows<6>() = dgamma;
  dzb.bottomRows<6>() = dvel * dgamma;
  dzb.block<6, 6>(6, 18) = jinv;

  Eigen::Matrix<double, 12, 24> dza = Eigen::Matrix<double, 12, 24>::Zero();
  dza.block<6, 6>(6, 6) = Mat6::Identity();

  const Eigen::Matrix<double, 12, 24> dz = li.lambda * dza + li.psi * dzb;

  // Pose rows: dT_tau = J_l(xi_p) dxi_p + Ad(exp(xi_p)) dT_a.
  out.jacobian.topRows<6>() = jl_xi * dz.topRows<6>();
  out.jacobian.block<6, 6>(0, 0) += adjoint(exp_se3(xi_p));
  // Velocity rows: dv_tau = dJ_l(xi_p)[.] xidot + J_l(xi_p) dxidot.
  out.jacobian.bottomRows<6>() =
      dleft_jacobian_times(xi_p, li.z_tau.tail<6>()) * dz.topRows<6>() +
      jl_xi * dz.bottomRows<6>();
  return out;
}

Mat12 interp_covariance(const JointNeighborCovariance& joint, double tau, int j,
                        const Mat6& qc) {
  const InterpOperators ops = interp_operators(joint.t_a, joint.t_b, tau, qc);
  Eigen::Matrix<double, 12, 24> blend;
  blend.leftCols<12>() = ops.lambda;
  blend.rightCols<12>() = ops.psi;
  Mat12 cov = blend * joint.joint_block(j) * blend.transpose() + ops.q_local;
  return 0.5 * (cov + cov.transpose());
}

}  // namespace crest
