#pragma once

// Gaussian factor classes of the window graph: error functions, analytic
// Jacobians and inverse covariances.
//
// The temporal motion factor and the arc-length spatial factor share one
// algebraic core; swapping (velocity, dt, Qc_time) for (strain, ds, Qc_space)
// maps one onto the other bit-for-bit.

#include <memory>
#include <vector>

#include <Eigen/Core>

#include "crest/interp.hpp"
#include "crest/measurement.hpp"
#include "crest/state.hpp"

namespace crest {

enum class FactorKind {
  Motion,
  Spatial,
  BoundaryPrior,
  PoseMeasurement,
  GyroMeasurement,
  MarginalPrior,
  Linear,  // test harnesses; not produced by the robot model
};

/// Inverse covariance of one factor. Construction checks symmetry and
/// positive definiteness (SingularNoise otherwise).
class NoiseModel {
 public:
  NoiseModel() = default;
  static NoiseModel from_information(const Eigen::MatrixXd& info);
  static NoiseModel from_covariance(const Eigen::MatrixXd& cov);
  static NoiseModel isotropic(int dim, double sigma);

  const Eigen::MatrixXd& information() const { return info_; }
  int dim() const { return static_cast<int>(info_.rows()); }

 private:
  explicit NoiseModel(Eigen::MatrixXd info) : info_(std::move(info)) {}
  Eigen::MatrixXd info_;
};

/// Power-spectral densities of the white-noise-on-acceleration priors:
/// body acceleration over time and strain rate over arc length.
struct PriorPowerSpectra {
  Mat6 qc_time = 100.0 * Mat6::Identity();
  Mat6 qc_space = (Twist() << 1e-2, 1e-2, 1e-2, 1.0, 1.0, 1.0).finished().asDiagonal();
};

/// WNOA kernel covariance over one interval:
/// [[dt^3/3 Qc, dt^2/2 Qc], [dt^2/2 Qc, dt Qc]].
Mat12 wnoa_kernel(double dt, const Mat6& qc);
/// Its inverse in closed block form.
Mat12 wnoa_kernel_inv(double dt, const Mat6& qc);

struct PairFactorEval {
  Vec12 error;
  Eigen::Matrix<double, 12, 18> jac_a;
  Eigen::Matrix<double, 12, 18> jac_b;
  NoiseModel noise;
};

/// Temporal prior between (i-1, j) and (i, j). With g = log(Tb Ta^{-1}):
/// error = [g - dt va; J_l^{-1}(g) vb - va].
PairFactorEval motion_error(const NodeState& xa, const NodeState& xb, double dt,
                            const Mat6& qc);

/// Arc-length prior between (i, j-1) and (i, j); same algebra with strain in
/// place of velocity and ds in place of dt.
PairFactorEval spatial_error(const NodeState& xa, const NodeState& xb, double ds,
                             const Mat6& qc);

struct UnaryFactorEval {
  Vec12 error;
  Eigen::Matrix<double, 12, 18> jac;
  NoiseModel noise;
};

/// Pins the s=0 node: error = [log(base_pose T0^{-1}); v0]. Strain is left
/// unconstrained.
UnaryFactorEval boundary_error(const NodeState& x0, const Pose& base_pose,
                               const NoiseModel& base_noise);

struct PoseMeasurementEval {
  Twist error;
  Eigen::Matrix<double, 6, 18> jac_a;
  Eigen::Matrix<double, 6, 18> jac_b;
  NoiseModel noise;
};

/// Time-interpolated pose measurement: error = log(y * T(tau)^{-1}) with
/// T(tau) the interpolated mean between the bracketing slices.
PoseMeasurementEval pose_measurement_error(const NodeState& xa, double t_a,
                                           const NodeState& xb, double t_b,
                                           const Measurement& meas);

struct GyroMeasurementEval {
  Vec3 error;
  Eigen::Matrix<double, 3, 18> jac_a;
  Eigen::Matrix<double, 3, 18> jac_b;
  NoiseModel noise;
};

/// Time-interpolated angular-rate measurement: error = y - rot(velocity(tau)).
GyroMeasurementEval gyro_measurement_error(const NodeState& xa, double t_a,
                                           const NodeState& xb, double t_b,
                                           const Measurement& meas);

// ---------------------------------------------------------------------------
// Polymorphic factor layer consumed by the solver and the window.

struct FactorEval {
  Eigen::VectorXd error;
  std::vector<Eigen::MatrixXd> jacobians;  // one (dim x 18) block per connected node
};

class Factor {
 public:
  virtual ~Factor() = default;
  virtual FactorKind kind() const = 0;
  virtual const std::vector<GridIndex>& connected() const = 0;
  virtual const NoiseModel& noise() const = 0;
  /// States are passed in connected() order.
  virtual FactorEval evaluate(const std::vector<const NodeState*>& states) const = 0;
  /// Error without Jacobians; line-search cost evaluations use this.
  virtual Eigen::VectorXd error_only(const std::vector<const NodeState*>& states) const {
    return evaluate(states).error;
  }
};

using FactorPtr = std::shared_ptr<const Factor>;

class MotionFactor final : public Factor {
 public:
  MotionFactor(GridIndex a, GridIndex b, double dt, const Mat6& qc);
  FactorKind kind() const override { return FactorKind::Motion; }
  const std::vector<GridIndex>& connected() const override { return connected_; }
  const NoiseModel& noise() const override { return noise_; }
  FactorEval evaluate(const std::vector<const NodeState*>& states) const override;
  Eigen::VectorXd error_only(const std::vector<const NodeState*>& states) const override;

 private:
  std::vector<GridIndex> connected_;
  double dt_;
  Mat6 qc_;
  NoiseModel noise_;
};

class SpatialFactor final : public Factor {
 public:
  SpatialFactor(GridIndex a, GridIndex b, double ds, const Mat6& qc);
  FactorKind kind() const override { return FactorKind::Spatial; }
  const std::vector<GridIndex>& connected() const override { return connected_; }
  const NoiseModel& noise() const override { return noise_; }
  FactorEval evaluate(const std::vector<const NodeState*>& states) const override;
  Eigen::VectorXd error_only(const std::vector<const NodeState*>& states) const override;

 private:
  std::vector<GridIndex> connected_;
  double ds_;
  Mat6 qc_;
  NoiseModel noise_;
};

class BoundaryFactor final : public Factor {
 public:
  BoundaryFactor(GridIndex x0, const Pose& base_pose, const NoiseModel& noise);
  FactorKind kind() const override { return FactorKind::BoundaryPrior; }
  const std::vector<GridIndex>& connected() const override { return connected_; }
  const NoiseModel& noise() const override { return noise_; }
  FactorEval evaluate(const std::vector<const NodeState*>& states) const override;

 private:
  std::vector<GridIndex> connected_;
  Pose base_pose_;
  NoiseModel noise_;
};

class PoseMeasurementFactor final : public Factor {
 public:
  PoseMeasurementFactor(GridIndex a, GridIndex b, double t_a, double t_b,
                        Measurement meas);
  FactorKind kind() const override { return FactorKind::PoseMeasurement; }
  const std::vector<GridIndex>& connected() const override { return connected_; }
  const NoiseModel& noise() const override { return noise_; }
SHOULD_NOT_HAPPEN

class GyroMeasurementFactor final : public Factor {
 public:
  GyroMeasurementFactor(GridIndex a, GridIndex b, double t_a, double t_b,
                        Measurement meas);
  FactorKind kind() const override { return FactorKind::GyroMeasurement; }
  const std::vector<GridIndex>& connected() const override { return connected_; }
  const NoiseModel& noise() const override { return noise_; }
  FactorEval evaluate(const std::vector<const NodeState*>& states) const override;
  Eigen::VectorXd error_only(const std::vector<const NodeState*>& states) const override;
  Eigen::VectorXd error_only(const std::vector<const NodeState*>& states) const override;

 private:
  std::vector<GridIndex> connected_;
  double t_a_, t_b_;
  Measurement meas_;
  NoiseModel noise_;
};

/// Quadratic prior 0.5 d^T H d - h^T d over one slice's local coordinates
/// about a frozen anchor, realized as a whitened linear factor through the
/// eigendecomposition H = U S U^T (rows with S_i <= rank_eps * S_max are
/// dropped). d(x) is re-evaluated against the anchor every iteration; H and
/// h stay frozen.
class MarginalPriorFactor final : public Factor {
 public:
  MarginalPriorFactor(long anchor_time_index, std::vector<NodeState> anchor,
                      const Eigen::MatrixXd& H, const Eigen::VectorXd& h);
  FactorKind kind() const override { return FactorKind::MarginalPrior; }
  const std::vector<GridIndex>& connected() const override { return connected_; }
  const NoiseModel& noise() const override { return noise_; }
  FactorEval evaluate(const std::vector<const NodeState*>& states) const override;

  const Eigen::MatrixXd& information() const { return H_; }
  const Eigen::VectorXd& information_vector() const { return h_; }
  const std::vector<NodeState>& anchor() const { return anchor_; }
  long anchor_time_index() const { return anchor_time_index_; }

  /// Local offset of the given states from the anchor, stacked per node.
  Eigen::VectorXd local_offset(const std::vector<const NodeState*>& states) const;

 private:
  long anchor_time_index_;
  std::vector<NodeState> anchor_;
  std::vector<GridIndex> connected_;
  Eigen::MatrixXd H_;
  Eigen::VectorXd h_;
  Eigen::MatrixXd sqrt_rows_;  // S^{1/2} U^T, r x 18N
  Eigen::VectorXd offset_;     // -S^{-1/2} U^T h
  NoiseModel noise_;
};

}  // namespace crest
