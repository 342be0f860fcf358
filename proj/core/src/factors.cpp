#include "crest/factors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "crest/errors.hpp"

namespace crest {

NoiseModel NoiseModel::from_information(const Eigen::MatrixXd& info) {
  if (info.rows() != info.cols()) throw SingularNoise("information matrix not square");
  const double scale = std::max(1.0, info.cwiseAbs().maxCoeff());
  if ((info - info.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw SingularNoise("information matrix not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) {
    throw SingularNoise("information matrix not positive definite");
  }
  return NoiseModel(info);
}

NoiseModel NoiseModel::from_covariance(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw SingularNoise("covariance not positive definite");
  }
  Eigen::MatrixXd info = llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
  info = 0.5 * (info + info.transpose()).eval();
  return NoiseModel(info);
}

NoiseModel NoiseModel::isotropic(int dim, double sigma) {
  if (sigma <= 0.0) throw SingularNoise("sigma must be positive");
  return NoiseModel(Eigen::MatrixXd::Identity(dim, dim) / (sigma * sigma));
}

Mat12 wnoa_kernel(double dt, const Mat6& qc) {
  Mat12 q;
  q.topLeftCorner<6, 6>() = dt * dt * dt / 3.0 * qc;
  q.topRightCorner<6, 6>() = dt * dt / 2.0 * qc;
  q.bottomLeftCorner<6, 6>() = q.topRightCorner<6, 6>();
  q.bottomRightCorner<6, 6>() = dt * qc;
  return q;
}

Mat12 wnoa_kernel_inv(double dt, const Mat6& qc) {
  Eigen::LLT<Mat6> llt(qc);
  if (llt.info() != Eigen::Success) throw SingularNoise("Qc not positive definite");
  const Mat6 qinv = llt.solve(Mat6::Identity());
  Mat12 out;
  out.topLeftCorner<6, 6>() = 12.0 / (dt * dt * dt) * qinv;
  out.topRightCorner<6, 6>() = -6.0 / (dt * dt) * qinv;
  out.bottomLeftCorner<6, 6>() = out.topRightCorner<6, 6>();
  out.bottomRightCorner<6, 6>() = 4.0 / dt * qinv;
  return out;
}

namespace {

// Shared core of the motion and spatial factors. `va`, `vb` are the
// derivative states the prior couples (velocity over time, strain over arc
// length), `h` the grid step.
PairFactorEval wnoa_pair_error(const NodeState& xa, const NodeState& xb, const Twist& va,
                               const Twist& vb, double h, const Mat6& qc, int vcol) {
  const Twist gamma = log_se3(xb.pose * xa.pose.inverse());
  const Mat6 jinv = left_jacobian_inv(gamma);

  PairFactorEval out;
  out.error.head<6>() = gamma - h * va;
  out.error.tail<6>() = jinv * vb - va;
  out.noise = NoiseModel::from_information(wnoa_kernel_inv(h, qc));

  const Mat6 dg_da = -jinv * adjoint(xb.pose * xa.pose.inverse());
  const Mat6 dvel = dleft_jacobian_inv_times(gamma, vb);

  out.jac_a.setZero();
  out.jac_b.setZero();
  out.jac_a.block<6, 6>(0, 0) = dg_da;
  out.jac_a.block<6, 6>(0, vcol) = -h * Mat6::Identity();
  out.jac_a.block<6, 6>(6, 0) = dvel * dg_da;
  out.jac_a.block<6, 6>(6, vcol) = -Mat6::Identity();
  out.jac_b.block<6, 6>(0, 0) = jinv;
  out.jac_b.block<6, 6>(6, 0) = dvel * jinv;
  out.jac_b.block<6, 6>(6, vcol) = jinv;
  return out;
}

Twist wnoa_pair_error_only(const NodeState& xa, const NodeState& xb, const Twist& va,
                           const Twist& vb, double h, Vec12& out) {
  const Twist gamma = log_se3(xb.pose * xa.pose.inverse());
  out.head<6>() = gamma - h * va;
  out.tail<6>() = left_jacobian_inv(gamma) * vb - va;
  return gamma;
}

}  // namespace

PairFactorEval motion_error(const NodeState& xa, const NodeState& xb, double dt,
                            const Mat6& qc) {
  return wnoa_pair_error(xa, xb, xa.velocity, xb.velocity, dt, qc, 6);
}

PairFactorEval spatial_error(const NodeState& xa, const NodeState& xb, double ds,
                             const Mat6& qc) {
  return wnoa_pair_error(xa, xb, xa.strain, xb.strain, ds, qc, 12);
}

UnaryFactorEval boundary_error(const NodeState& x0, const Pose& base_pose,
                               const NoiseModel& base_noise) {
  UnaryFactorEval out;
  const Twist e1 = log_se3(base_pose * x0.pose.inverse());
  out.error.head<6>() = e1;
  out.error.tail<6>() = x0.velocity;
  out.jac.setZero();
  out.jac.block<6, 6>(0, 0) = -left_jacobian_inv(Twist(-e1));
  out.jac.block<6, 6>(6, 6) = Mat6::Identity();
  out.noise = base_noise;
  return out;
}

PoseMeasurementEval pose_measurement_error(const NodeState& xa, double t_a,
                                           const NodeState& xb, double t_b,
                                           const Measurement& meas) {
  if (meas.timestamp <= t_a || meas.timestamp > t_b) {
    throw TimestampOutsideInterval(meas.timestamp, t_a, t_b);
  }
  const InterpMeanJacobians mj = interp_mean_jacobians(xa, t_a, xb, t_b, meas.timestamp);
  PoseMeasurementEval out;
  out.error = log_se3(meas.pose * mj.pose.inverse());
  const Eigen::Matrix<double, 6, 24> de =
      -left_jacobian_inv(Twist(-out.error)) * mj.jacobian.topRows<6>();
  out.jac_a.setZero();
  out.jac_b.setZero();
  out.jac_a.leftCols<12>() = de.leftCols<12>();
  out.jac_b.leftCols<12>() = de.rightCols<12>();
  out.noise = NoiseModel::from_covariance(meas.noise);
  return out;
}

GyroMeasurementEval gyro_measurement_error(const NodeState& xa, double t_a,
                                           const NodeState& xb, double t_b,
                                           const Measurement& meas) {
  if (meas.timestamp <= t_a || meas.timestamp > t_b) {
    throw TimestampOutsideInterval(meas.timestamp, t_a, t_b);
  }
  const InterpMeanJacobians mj = interp_mean_jacobians(xa, t_a, xb, t_b, meas.timestamp);
  GyroMeasurementEval out;
  out.error = meas.angular_rate - mj.velocity.tail<3>();
  const Eigen::Matrix<double, 3, 24> de = -mj.jacobian.block<3, 24>(9, 0);
  out.jac_a.setZero();
  out.jac_b.setZero();
  out.jac_a.leftCols<12>() = de.leftCols<12>();
  out.jac_b.leftCols<12>() = de.rightCols<12>();
  out.noise = NoiseModel::from_covariance(meas.noise);
  return out;
}

// ---------------------------------------------------------------------------

MotionFactor::MotionFactor(GridIndex a, GridIndex b, double dt, const Mat6& qc)
    : connected_{a, b}, dt_(dt), qc_(qc),
      noise_(NoiseModel::from_information(wnoa_kernel_inv(dt, qc))) {}

FactorEval MotionFactor::evaluate(const std::vector<const NodeState*>& states) const {
  PairFactorEval pe = motion_error(*states[0], *states[1], dt_, qc_);
  return FactorEval{pe.error, {pe.jac_a, pe.jac_b}};
}

Eigen::VectorXd MotionFactor::error_only(const std::vector<const NodeState*>& states) const {
  Vec12 e;
  wnoa_pair_error_only(*states[0], *states[1], states[0]->velocity, states[1]->velocity,
                       dt_, e);
  return e;
}

SpatialFactor::SpatialFactor(GridIndex a, GridIndex b, double ds, const Mat6& qc)
    : connected_{a, b}, ds_(ds), qc_(qc),
      noise_(NoiseModel::from_information(wnoa_kernel_inv(ds, qc))) {}

FactorEval SpatialFactor::evaluate(const std::vector<const NodeState*>& states) const {
  PairFactorEval pe = spatial_error(*states[0], *states[1], ds_, qc_);
  return FactorEval{pe.error, {pe.jac_a, pe.jac_b}};
}

Eigen::VectorXd SpatialFactor::error_only(const std::vector<const NodeState*>& states) const {
  Vec12 e;
  wnoa_pair_error_only(*states[0], *states[1], states[0]->strain, states[1]->strain, ds_, e);
  return e;
}

BoundaryFactor::BoundaryFactor(GridIndex x0, const Pose& base_pose, const NoiseModel& noise)
    : connected_{x0}, base_pose_(base_pose), noise_(noise) {}

FactorEval BoundaryFactor::evaluate(const std::vector<const NodeState*>& states) const {
  UnaryFactorEval ue = boundary_error(*states[0], base_pose_, noise_);
  return FactorEval{ue.error, {ue.jac}};
}

PoseMeasurementFactor::PoseMeasurementFactor(GridIndex a, GridIndex b, double t_a,
                                             double t_b, Measurement meas)
    : connected_{a, b}, t_a_(t_a), t_b_(t_b), meas_(std::move(meas)),
      noise_(NoiseModel::from_covariance(meas_.noise)) {}

FactorEval PoseMeasurementFactor::evaluate(
    const std::vector<const NodeState*>& states) const {
  PoseMeasurementEval pe =
      pose_measurement_error(*states[0], t_a_, *states[1], t_b_, meas_);
  return FactorEval{pe.error, {pe.jac_a, pe.jac_b}};
}

Eigen::VectorXd PoseMeasurementFactor::error_only(
    const std::vector<const NodeState*>& states) const {
  const NodeState x =
      interp_mean(*states[0], t_a_, *states[1], t_b_, meas_.timestamp);
  return log_se3(meas_.pose * x.pose.inverse());
}

GyroMeasurementFactor::GyroMeasurementFactor(GridIndex a, GridIndex b, double t_a,
                                             double t_b, Measurement meas)
    : connected_{a, b}, t_a_(t_a), t_b_(t_b), meas_(std::move(meas)),
      noise_(NoiseModel::from_covariance(meas_.noise)) {}

FactorEval GyroMeasurementFactor::evaluate(
    const std::vector<const NodeState*>& states) const {
  GyroMeasurementEval ge =
      gyro_measurement_error(*states[0], t_a_, *states[1], t_b_, meas_);
  return FactorEval{ge.error, {ge.jac_a, ge.jac_b}};
}

Eigen::VectorXd GyroMeasurementFactor::error_only(
    const std::vector<const NodeState*>& states) const {
  const NodeState x =
      interp_mean(*states[0], t_a_, *states[1], t_b_, meas_.timestamp);
  return meas_.angular_rate - x.velocity.tail<3>();
}

MarginalPriorFactor::MarginalPriorFactor(long anchor_time_index,
                                         std::vector<NodeState> anchor,
                                         const Eigen::MatrixXd& H,
                                         const Eigen::VectorXd& h)
    : anchor_time_index_(anchor_time_index), anchor_(std::move(anchor)), H_(H), h_(h) {
  const int n = static_cast<int>(anchor_.size()) * kNodeDim;
  if (H.rows() != n || H.cols() != n || h.size() != n) {
    throw SingularNoise("marginal prior dimension mismatch");
  }
  for (int j = 0; j < static_cast<int>(anchor_.size()); ++j) {
    connected_.push_back(GridIndex{anchor_time_index_, j});
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (H + H.transpose()));
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double cutoff = std::max(ev.cwiseAbs().maxCoeff(), 1.0) * 1e-12;
  if (ev.minCoeff() < -cutoff * 1e3) {
    throw NotPositiveDefinite("marginal prior information has negative eigenvalues");
  }
  int rank = 0;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] > cutoff) ++rank;
  }
  sqrt_rows_.resize(rank, n);
  offset_.resize(rank);
  int r = 0;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] <= cutoff) continue;
    const double s = std::sqrt(ev[i]);
    sqrt_rows_.row(r) = s * eig.eigenvectors().col(i).transpose();
    offset_[r] = -eig.eigenvectors().col(i).dot(h) / s;
    ++r;
  }
  noise_ = NoiseModel::from_information(Eigen::MatrixXd::Identity(rank, rank));
}

Eigen::VectorXd MarginalPriorFactor::local_offset(
    const std::vector<const NodeState*>& states) const {
  Eigen::VectorXd d(static_cast<int>(anchor_.size()) * kNodeDim);
  for (size_t j = 0; j < anchor_.size(); ++j) {
    const int o = static_cast<int>(j) * kNodeDim;
    d.segment<6>(o) = log_se3(states[j]->pose * anchor_[j].pose.inverse());
    d.segment<6>(o + 6) = states[j]->velocity - anchor_[j].velocity;
    d.segment<6>(o + 12) = states[j]->strain - anchor_[j].strain;
  }
  return d;
}

FactorEval MarginalPriorFactor::evaluate(
    const std::vector<const NodeState*>& states) const {
  const Eigen::VectorXd d = local_offset(states);
  FactorEval out;
  out.error = sqrt_rows_ * d + offset_;
  out.jacobians.reserve(anchor_.size());
  for (size_t j = 0; j < anchor_.size(); ++j) {
    const int o = static_cast<int>(j) * kNodeDim;
    Eigen::MatrixXd jac = sqrt_rows_.middleCols(o, kNodeDim);
    // d_pose depends on the pose perturbation through J_l^{-1}(d_pose).
    const Mat6 dpose = left_jacobian_inv(Twist(d.segment<6>(o)));
    jac.leftCols<6>() = (jac.leftCols<6>() * dpose).eval();
    out.jacobians.push_back(std::move(jac));
  }
  return out;
}

}  // namespace crest
