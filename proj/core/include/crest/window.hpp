#pragma once

// The sliding-window filter: expansion, Schur-complement marginalization,
// locked-state bookkeeping and estimate extraction.
//
// Each step expands the window by one time slice, runs Gauss-Newton over the
// whole window, marginalizes the oldest slice once the slice count exceeds K
// and extracts the configured estimate. Marginalized slices are locked: their
// mean, marginal covariance and the joint covariance with the next slice are
// recorded for after-the-fact continuous-time queries.

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "crest/interp.hpp"
#include "crest/measurement.hpp"
#include "crest/solver.hpp"

namespace crest {

enum class ExtractionPolicy { Back, Front };

struct SwfConfig {
  double window_seconds = 0.1;
  double dt = 1.0 / 30.0;
  ExtractionPolicy extraction = ExtractionPolicy::Back;
  int max_iterations = 10;
  double delta_tol = 1e-6;

  // Bootstrap prior over the first slice (per-coordinate sigmas).
  double init_sigma_pose = 0.1;
  double init_sigma_velocity = 1.0;
  double init_sigma_strain = 1.0;

  /// window_seconds -> slice count; 0 s is the single-slice iterated filter.
  int window_slices() const {
    return static_cast<int>(std::lround(window_seconds / dt)) + 1;
  }
};

/// Noise assumptions and sensor layout of the estimator's robot model.
struct ModelConfig {
  Pose base_pose;
  double boundary_sigma_pose = 1e-4;      // mount is known and fixed
  double boundary_sigma_velocity = 1e-4;  // base velocity pinned to zero
  double sigma_pos = 1e-3;                // pose sensor, meters
  double sigma_rot = 0.5 * 3.14159265358979323846 / 180.0;  // radians
  double sigma_gyro = 0.01;               // rad/s
  bool use_base_pose_sensor = false;
};

/// Produces the factors of the graph; the robot model below is the
/// production implementation, test harnesses may inject linear graphs.
class FactorAssembler {
 public:
  virtual ~FactorAssembler() = default;
  virtual std::vector<FactorPtr> bootstrap_factors(const TimeSlice& slice0) const = 0;
  virtual std::vector<FactorPtr> expansion_factors(
      long new_time_index, double t_prev, double t_new,
      std::span<const Measurement> measurements) const = 0;
};

/// Motion + spatial + boundary priors and time-interpolated measurement
/// factors for the continuum robot grid.
class ContinuumModel final : public FactorAssembler {
 public:
  ContinuumModel(StateConfig state, ModelConfig model, PriorPowerSpectra spectra);

  std::vector<FactorPtr> bootstrap_factors(const TimeSlice& slice0) const override;
  std::vector<FactorPtr> expansion_factors(
      long new_time_index, double t_prev, double t_new,
      std::span<const Measurement> measurements) const override;

  const StateConfig& state_config() const { return state_; }
  const ModelConfig& model_config() const { return model_; }
  const PriorPowerSpectra& spectra() const { return spectra_; }

  /// Grid node a sensor measurement attaches to; OffGridSensor when the
  /// measurement does not target a supported node.
  int sensor_node(const Measurement& m) const;

 private:
  FactorPtr measurement_factor(long new_time_index, double t_prev, double t_new,
                               const Measurement& m) const;

  StateConfig state_;
  ModelConfig model_;
  PriorPowerSpectra spectra_;
};

/// A slice removed from optimization: frozen mean, marginal covariance and
/// (for K >= 2) the joint covariance with the following slice.
struct LockedRecord {
  double timestamp = 0.0;
  std::vector<NodeState> mean;
  Eigen::MatrixXd covariance;  // 18N x 18N
  std::optional<JointNeighborCovariance> joint_with_next;
};

/// Per-step output: the extracted slice with its Laplace covariance.
struct Estimate {
  double timestamp = 0.0;
  long time_index = 0;
  std::vector<NodeState> mean;
  Eigen::MatrixXd covariance;  // 18N x 18N
  SolveReport report;
};

/// Schur complement onto the kept range: H_r = H_rr - H_rm H_mm^{-1} H_mr,
/// h_r = h_r - H_rm H_mm^{-1} h_m. Throws SingularHmm when the marginalized
/// block is not invertible.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> schur_marginalize(const Eigen::MatrixXd& H,
                                                              const Eigen::VectorXd& h,
                                                              int drop_offset,
                                                              int drop_dim);

/// Straight-rod slice used to bootstrap the first window: poses chained from
/// the base along the local x axis, strains set to the matching left twist,
/// velocities zero.
TimeSlice straight_rod_slice(double timestamp, const StateConfig& cfg, const Pose& base);

class SlidingWindow {
 public:
  SlidingWindow(StateConfig state, SwfConfig swf,
                std::shared_ptr<const FactorAssembler> assembler);

  /// Installs the first slice with a diagonal prior and runs the prior-only
  /// solve. Must be called exactly once, before the first step.
  void bootstrap(double t0, TimeSlice initial);

  /// expand -> solve -> (marginalize if oversize) -> extract.
  Estimate step(double new_timestamp, std::span<const Measurement> measurements);

  /// Locks all remaining window slices into records (no marginalization, the
  /// final solve's covariances are reused); call after the last step before
  /// continuous-time queries over the full timeline.
  void finalize();

  // Pipeline stages, exposed for direct use.
  void expand(double new_timestamp, std::span<const Measurement> measurements);
  SolveReport solve();
  LockedRecord marginalize_oldest();
  Estimate extract(ExtractionPolicy policy) const;

  const std::vector<LockedRecord>& locked() const { return records_; }
  const std::vector<TimeSlice>& slices() const { return slices_; }
  long first_time_index() const { return first_time_index_; }
  const std::vector<FactorPtr>& factors() const { return factors_; }
  const MarginalPriorFactor& marginal_prior() const { return *prior_; }
  const SwfConfig& config() const { return swf_; }

 private:
  GraphView view();
  Eigen::MatrixXd slice_covariance(int local_slice) const;

  StateConfig state_;
  SwfConfig swf_;
  std::shared_ptr<const FactorAssembler> assembler_;

  std::vector<TimeSlice> slices_;
  long first_time_index_ = 0;
  std::vector<FactorPtr> factors_;
  std::shared_ptr<const MarginalPriorFactor> prior_;
  std::vector<LockedRecord> records_;

  SpdSolver solver_;
  long solved_first_index_ = 0;
  bool solved_ = false;
  bool bootstrapped_ = false;

  // Slice covariance lifted from the last marginalization's joint solve, so
  // the common extract-after-marginalize path needs no extra backsolve.
  Eigen::MatrixXd cached_cov_;
  long cached_cov_index_ = -1;
};

/// Mean (and covariance, when requested and available) of the locked history
/// at an arbitrary time. Covariance queries need the stored joint neighbor
/// covariances: MissingJointCovariance in filter mode (K = 1).
struct ContinuousEstimate {
  double timestamp = 0.0;
  std::vector<NodeState> mean;
  std::vector<Mat12> covariance;  // per node (pose, velocity); empty if not requested
};
ContinuousEstimate query_continuous(const std::vector<LockedRecord>& records, double tau,
                                    const Mat6& qc_time, bool want_covariance);

/// Largest jump of the interpolated (pose, velocity) covariance across record
/// boundaries; the documented filter discontinuity diagnostic.
double covariance_discontinuity(const std::vector<LockedRecord>& records,
                                const Mat6& qc_time);

}  // namespace crest
