#pragma once

// Continuous-time interpolation of the constant-velocity (WNOA) process
// between two estimation knots: mean interpolation for asynchronous
// measurement factors and metric evaluation, covariance interpolation from
// stored joint covariances of locked neighbors.
//
// Local coordinates about knot a: z(t) = [xi(t); xidot(t)] with
// T(t) = exp(xi(t)) * T_a and velocity = J_l(xi) * xidot. Knot b enters as
// gamma_b = [log(T_b T_a^{-1}); J_l^{-1}(.) * velocity_b].

#include <Eigen/Core>

#include "crest/state.hpp"

namespace crest {

using Mat24 = Eigen::Matrix<double, 24, 24>;

/// Mean/covariance blending operators for one query time.
/// At tau = t_a: Lambda = I, Psi = 0; at tau = t_b: Lambda = 0, Psi = I.
struct InterpOperators {
  Mat12 lambda = Mat12::Identity();
  Mat12 psi = Mat12::Zero();
  /// Conditional covariance of z(tau) given both endpoint states.
  Mat12 q_local = Mat12::Zero();
};

/// Joint covariance over two neighboring slices' full node blocks, stored
/// when the older slice is locked. joint_block(j) extracts the 24x24
/// (pose, velocity) covariance of node j at both times, the input to
/// interp_covariance.
struct JointNeighborCovariance {
  double t_a = 0.0;
  double t_b = 0.0;
  int nodes = 0;
  Eigen::MatrixXd cov;  // (2*18*nodes)^2, node-major within each slice

  Mat24 joint_block(int j) const;
};

/// Transition-matrix form of the WNOA interpolation operators:
/// Psi = Q_tau Phi(t_b,tau)^T Q_ab^{-1}, Lambda = Phi(tau,t_a) - Psi Phi(t_b,t_a).
/// Throws TimestampOutsideInterval unless t_a <= tau <= t_b (t_a only as the
/// degenerate left endpoint).
InterpOperators interp_operators(double t_a, double t_b, double tau, const Mat6& qc);

/// Interpolated node state at tau; strain is blended linearly (it has no
/// temporal process model). Exact at both endpoints.
NodeState interp_mean(const NodeState& xa, double t_a, const NodeState& xb, double t_b,
                      double tau);

/// Interpolated (pose, velocity) mean at tau together with the exact 12x24
/// Jacobian with respect to [dT_a, dv_a, dT_b, dv_b]; feeds the
/// time-interpolated measurement factors.
struct InterpMeanJacobians {
  Pose pose;
  Twist velocity = Twist::Zero();
  Eigen::Matrix<double, 12, 24> jacobian = Eigen::Matrix<double, 12, 24>::Zero();
};
InterpMeanJacobians interp_mean_jacobians(const NodeState& xa, double t_a,
                                          const NodeState& xb, double t_b, double tau);

/// Covariance of node j's (pose, velocity) block at tau:
/// [Lambda Psi] joint_block(j) [Lambda Psi]^T + Q_local(tau).
Mat12 interp_covariance(const JointNeighborCovariance& joint, double tau, int j,
                        const Mat6& qc);

}  // namespace crest
