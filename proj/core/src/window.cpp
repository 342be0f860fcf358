#include "crest/window.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <Eigen/Cholesky>

#include "crest/errors.hpp"

namespace crest {

namespace {
constexpr double kTimestampTol = 1e-9;
}

// ---------------------------------------------------------------------------
// ContinuumModel

ContinuumModel::ContinuumModel(StateConfig state, ModelConfig model, PriorPowerSpectra spectra)
    : state_(state), model_(model), spectra_(spectra) {}

namespace {

NoiseModel boundary_noise(const ModelConfig& m) {
  Eigen::VectorXd info(12);
  info.head<6>().setConstant(1.0 / (m.boundary_sigma_pose * m.boundary_sigma_pose));
  info.tail<6>().setConstant(1.0 / (m.boundary_sigma_velocity * m.boundary_sigma_velocity));
  return NoiseModel::from_information(info.asDiagonal());
}

}  // namespace

std::vector<FactorPtr> ContinuumModel::bootstrap_factors(const TimeSlice& slice0) const {
  std::vector<FactorPtr> out;
  out.push_back(std::make_shared<BoundaryFactor>(GridIndex{0, 0}, model_.base_pose,
                                                 boundary_noise(model_)));
  const double ds = state_.node_spacing();
  for (int j = 1; j < state_.nodes; ++j) {
    out.push_back(std::make_shared<SpatialFactor>(GridIndex{0, j - 1}, GridIndex{0, j}, ds,
                                                  spectra_.qc_space));
  }
  (void)slice0;
  return out;
}

int ContinuumModel::sensor_node(const Measurement& m) const {
  const int tip = state_.nodes - 1;
  switch (m.kind) {
    case MeasurementKind::TipPose:
      if (m.node_index != tip) {
        throw OffGridSensor("tip pose measurement must target node " + std::to_string(tip));
      }
      return tip;
    case MeasurementKind::BasePose:
      if (m.node_index != 0) {
        throw OffGridSensor("base pose measurement must target node 0");
      }
      return 0;
    case MeasurementKind::Gyro: {
      const int mid = (state_.nodes - 1) / 2;
      if (m.node_index != tip && !(m.node_index == mid && (state_.nodes - 1) % 2 == 0)) {
        throw OffGridSensor("gyro node " + std::to_string(m.node_index) +
                            " is not on the grid sensor set");
      }
      return m.node_index;
    }
  }
  throw OffGridSensor("unknown measurement kind");
}

FactorPtr ContinuumModel::measurement_factor(long new_time_index, double t_prev,
                                             double t_new, const Measurement& m) const {
  if (m.timestamp <= t_prev || m.timestamp > t_new) {
    throw TimestampOutsideInterval(m.timestamp, t_prev, t_new);
  }
  const int j = sensor_node(m);
  const GridIndex a{new_time_index - 1, j};
  const GridIndex b{new_time_index, j};
  Measurement meas = m;
  if (m.kind == MeasurementKind::Gyro) {
    if (meas.noise.size() == 0) {
      meas.noise = model_.sigma_gyro * model_.sigma_gyro * Eigen::MatrixXd::Identity(3, 3);
    }
    return std::make_shared<GyroMeasurementFactor>(a, b, t_prev, t_new, std::move(meas));
  }
  if (meas.noise.size() == 0) {
    Eigen::VectorXd var(6);
    var.head<3>().setConstant(model_.sigma_pos * model_.sigma_pos);
    var.tail<3>().setConstant(model_.sigma_rot * model_.sigma_rot);
    meas.noise = Eigen::MatrixXd(var.asDiagonal());
  }
  return std::make_shared<PoseMeasurementFactor>(a, b, t_prev, t_new, std::move(meas));
}

std::vector<FactorPtr> ContinuumModel::expansion_factors(
    long new_time_index, double t_prev, double t_new,
    std::span<const Measurement> measurements) const {
  std::vector<FactorPtr> out;
  const double dt = t_new - t_prev;
  const double ds = state_.node_spacing();
  for (int j = 0; j < state_.nodes; ++j) {
    out.push_back(std::make_shared<MotionFactor>(GridIndex{new_time_index - 1, j},
                                                 GridIndex{new_time_index, j}, dt,
                                                 spectra_.qc_time));
  }
  for (int j = 1; j < state_.nodes; ++j) {
    out.push_back(std::make_shared<SpatialFactor>(GridIndex{new_time_index, j - 1},
                                                  GridIndex{new_time_index, j}, ds,
                                                  spectra_.qc_space));
  }
  out.push_back(std::make_shared<BoundaryFactor>(GridIndex{new_time_index, 0},
                                                 model_.base_pose, boundary_noise(model_)));
  for (const Measurement& m : measurements) {
    if (m.kind == MeasurementKind::BasePose && !model_.use_base_pose_sensor) continue;
    out.push_back(measurement_factor(new_time_index, t_prev, t_new, m));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::pair<Eigen::MatrixXd, Eigen::VectorXd> schur_marginalize(const Eigen::MatrixXd& H,
                                                              const Eigen::VectorXd& h,
                                                              int drop_offset, int drop_dim) {
  const int dim = static_cast<int>(H.rows());
  const int keep_dim = dim - drop_dim;
  std::vector<int> keep;
  keep.reserve(keep_dim);
  for (int i = 0; i < dim; ++i) {
    if (i < drop_offset || i >= drop_offset + drop_dim) keep.push_back(i);
  }

  Eigen::MatrixXd h_kk(keep_dim, keep_dim), h_kd(keep_dim, drop_dim);
  Eigen::VectorXd h_k(keep_dim);
  for (int r = 0; r < keep_dim; ++r) {
    h_k[r] = h[keep[r]];
    for (int c = 0; c < keep_dim; ++c) h_kk(r, c) = H(keep[r], keep[c]);
    for (int c = 0; c < drop_dim; ++c) h_kd(r, c) = H(keep[r], drop_offset + c);
  }
  const Eigen::MatrixXd h_dd = H.block(drop_offset, drop_offset, drop_dim, drop_dim);
  const Eigen::VectorXd h_d = h.segment(drop_offset, drop_dim);

  Eigen::LDLT<Eigen::MatrixXd> ldlt(h_dd);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12 ||
      ldlt.vectorD().minCoeff() <= 0.0) {
    throw SingularHmm("marginalized block is not invertible (unconstrained state?)");
  }
  Eigen::MatrixXd out_h = h_kk - h_kd * ldlt.solve(h_kd.transpose());
  Eigen::VectorXd out_v = h_k - h_kd * ldlt.solve(h_d);
  out_h = 0.5 * (out_h + out_h.transpose()).eval();
  return {std::move(out_h), std::move(out_v)};
}

TimeSlice straight_rod_slice(double timestamp, const StateConfig& cfg, const Pose& base) {
  TimeSlice slice;
  slice.timestamp = timestamp;
  slice.nodes.resize(cfg.nodes);
  Twist tangent = Twist::Zero();
  tangent[0] = 1.0;
  for (int j = 0; j < cfg.nodes; ++j) {
    Twist step = cfg.arc_length(j) * tangent;
    NodeState n;
    n.pose = base * exp_se3(step);
    n.strain = adjoint(n.pose) * tangent;
    slice.nodes[static_cast<size_t>(j)] = n;
  }
  return slice;
}

// ---------------------------------------------------------------------------
// SlidingWindow

SlidingWindow::SlidingWindow(StateConfig state, SwfConfig swf,
                             std::shared_ptr<const FactorAssembler> assembler)
    : state_(state), swf_(swf), assembler_(std::move(assembler)) {}

GraphView SlidingWindow::view() {
  return GraphView{&slices_, first_time_index_, state_.nodes, &factors_};
}

void SlidingWindow::bootstrap(double t0, TimeSlice initial) {
  if (bootstrapped_) throw ConfigError("window already bootstrapped");
  if (static_cast<int>(initial.nodes.size()) != state_.nodes) {
    throw ConfigError("bootstrap slice node count mismatch");
  }
  initial.timestamp = t0;
  slices_ = {std::move(initial)};
  first_time_index_ = 0;

  const int nb = kNodeDim * state_.nodes;
  Eigen::VectorXd info(nb);
  for (int j = 0; j < state_.nodes; ++j) {
    const int o = kNodeDim * j;
    info.segment<6>(o).setConstant(1.0 / (swf_.init_sigma_pose * swf_.init_sigma_pose));
    info.segment<6>(o + 6).setConstant(
        1.0 / (swf_.init_sigma_velocity * swf_.init_sigma_velocity));
    info.segment<6>(o + 12).setConstant(
        1.0 / (swf_.init_sigma_strain * swf_.init_sigma_strain));
  }
  prior_ = std::make_shared<MarginalPriorFactor>(0, slices_[0].nodes,
                                                 Eigen::MatrixXd(info.asDiagonal()),
                                                 Eigen::VectorXd::Zero(nb));
  factors_.clear();
  factors_.push_back(prior_);
  for (FactorPtr& f : assembler_->bootstrap_factors(slices_[0])) {
    factors_.push_back(std::move(f));
  }
  bootstrapped_ = true;
  solve();
}

void SlidingWindow::expand(double new_timestamp, std::span<const Measurement> measurements) {
  if (!bootstrapped_) throw ConfigError("bootstrap the window before stepping");
  cached_cov_index_ = -1;
  const double t_prev = slices_.back().timestamp;
  if (std::abs(new_timestamp - (t_prev + swf_.dt)) > kTimestampTol) {
    throw NonMonotonicTimestamp("expected timestamp " + std::to_string(t_prev + swf_.dt) +
                                ", got " + std::to_string(new_timestamp));
  }

  const TimeSlice& prev = slices_.back();
  TimeSlice next;
  next.timestamp = new_timestamp;
  next.nodes.resize(prev.nodes.size());
  const double dt = new_timestamp - t_prev;
  const double ds = state_.node_spacing();
  for (size_t j = 0; j < prev.nodes.size(); ++j) {
    const NodeState& up = prev.nodes[j];
    const Pose temporal = exp_se3(Twist(dt * up.velocity)) * up.pose;
    NodeState n;
    if (j == 0) {
      n.pose = temporal;
      n.velocity = up.velocity;
      n.strain = up.strain;
    } else {
      const NodeState& left = next.nodes[j - 1];
      const Pose spatial = exp_se3(Twist(ds * left.strain)) * left.pose;
      const Twist gap = log_se3(spatial * temporal.inverse());
      n.pose = exp_se3(Twist(0.5 * gap)) * temporal;  // SE(3) geodesic midpoint
      n.velocity = 0.5 * (up.velocity + left.velocity);
      n.strain = 0.5 * (up.strain + left.strain);
    }
    next.nodes[j] = n;
  }

  const long new_index = first_time_index_ + static_cast<long>(slices_.size());
  slices_.push_back(std::move(next));
  for (FactorPtr& f :
       assembler_->expansion_factors(new_index, t_prev, new_timestamp, measurements)) {
    factors_.push_back(std::move(f));
  }
}

SolveReport SlidingWindow::solve() {
  GraphView v = view();
  SolveOptions opts;
  opts.max_iterations = swf_.max_iterations;
  opts.delta_tol = swf_.delta_tol;
  SolveReport report = gauss_newton(v, opts, &solver_);
  solved_ = true;
  solved_first_index_ = first_time_index_;
  cached_cov_index_ = -1;
  return report;
}

Eigen::MatrixXd SlidingWindow::slice_covariance(int local_slice) const {
  const int nb = kNodeDim * state_.nodes;
  const long global = first_time_index_ + local_slice;
  if (global == cached_cov_index_) return cached_cov_;
  const long solved_local = global - solved_first_index_;
  return laplace_covariance_range(solver_, static_cast<int>(solved_local) * nb, nb);
}

LockedRecord SlidingWindow::marginalize_oldest() {
  if (slices_.size() < 2) throw ConfigError("need at least two slices to marginalize");
  if (!solved_ || solved_first_index_ != first_time_index_) {
    throw ConfigError("marginalization requires a converged solve at the current window");
  }

  const int nb = kNodeDim * state_.nodes;
  const Eigen::MatrixXd joint = laplace_covariance_range(solver_, 0, 2 * nb);

  LockedRecord record;
  record.timestamp = slices_[0].timestamp;
  record.mean = slices_[0].nodes;
  record.covariance = joint.topLeftCorner(nb, nb);
  if (swf_.window_slices() >= 2) {
    JointNeighborCovariance jn;
    jn.t_a = slices_[0].timestamp;
    jn.t_b = slices_[1].timestamp;
    jn.nodes = state_.nodes;
    jn.cov = joint;
    record.joint_with_next = std::move(jn);
  }

  // Joint information over the oldest two slices from the factors touching
  // the marginalized slice, linearized at the current estimate.
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * nb, 2 * nb);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(2 * nb);
  std::vector<FactorPtr> kept;
  kept.reserve(factors_.size());
  std::vector<const NodeState*> states;
  GraphView v = view();
  for (const FactorPtr& f : factors_) {
    const auto& conn = f->connected();
    const bool touches = std::any_of(conn.begin(), conn.end(), [&](const GridIndex& g) {
      return g.time_index == first_time_index_;
    });
    if (!touches) {
      kept.push_back(f);
      continue;
    }
    states.clear();
    for (const GridIndex& g : conn) {
      if (g.time_index > first_time_index_ + 1) {
        throw ConfigError("factor spans past the marginalization boundary");
      }
      states.push_back(v.node(g));
    }
    const FactorEval eval = f->evaluate(states);
    const Eigen::MatrixXd& info = f->noise().information();
    for (size_t i = 0; i < conn.size(); ++i) {
      const int oi = v.offset(conn[i]);
      h.segment<kNodeDim>(oi).noalias() -=
          eval.jacobians[i].transpose() * (info * eval.error);
      for (size_t k = 0; k < conn.size(); ++k) {
        const int ok = v.offset(conn[k]);
        H.block<kNodeDim, kNodeDim>(oi, ok).noalias() +=
            eval.jacobians[i].transpose() * info * eval.jacobians[k];
      }
    }
  }

  auto [h_r, v_r] = schur_marginalize(H, h, 0, nb);

  prior_ = std::make_shared<MarginalPriorFactor>(first_time_index_ + 1, slices_[1].nodes,
                                                 h_r, v_r);
  kept.push_back(prior_);
  factors_ = std::move(kept);
  cached_cov_ = joint.bottomRightCorner(nb, nb);
  cached_cov_index_ = first_time_index_ + 1;
  slices_.erase(slices_.begin());
  ++first_time_index_;
  return record;
}

Estimate SlidingWindow::extract(ExtractionPolicy policy) const {
  if (!solved_) throw ConfigError("extract requires a solved window");
  const int local = policy == ExtractionPolicy::Back ? 0 : static_cast<int>(slices_.size()) - 1;
  Estimate est;
  est.timestamp = slices_[static_cast<size_t>(local)].timestamp;
  est.time_index = first_time_index_ + local;
  est.mean = slices_[static_cast<size_t>(local)].nodes;
  est.covariance = slice_covariance(local);
  return est;
}

Estimate SlidingWindow::step(double new_timestamp, std::span<const Measurement> measurements) {
  const auto start = std::chrono::steady_clock::now();
  expand(new_timestamp, measurements);
  SolveReport report = solve();
  if (static_cast<int>(slices_.size()) > swf_.window_slices()) {
    records_.push_back(marginalize_oldest());
  }
  Estimate est = extract(swf_.extraction);
  est.report = report;
  est.report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
          .count();
  return est;
}

void SlidingWindow::finalize() {
  if (!solved_) throw ConfigError("finalize requires a solved window");
  const int nb = kNodeDim * state_.nodes;
  for (int k = 0; k < static_cast<int>(slices_.size()); ++k) {
    LockedRecord record;
    record.timestamp = slices_[static_cast<size_t>(k)].timestamp;
    record.mean = slices_[static_cast<size_t>(k)].nodes;
    record.covariance = slice_covariance(k);
    if (swf_.window_slices() >= 2 && k + 1 < static_cast<int>(slices_.size())) {
      const long solved_local = (first_time_index_ + k) - solved_first_index_;
      JointNeighborCovariance jn;
      jn.t_a = slices_[static_cast<size_t>(k)].timestamp;
      jn.t_b = slices_[static_cast<size_t>(k) + 1].timestamp;
      jn.nodes = state_.nodes;
      jn.cov = laplace_covariance_range(solver_, static_cast<int>(solved_local) * nb, 2 * nb);
      record.joint_with_next = std::move(jn);
    }
    records_.push_back(std::move(record));
  }
  slices_.clear();
  factors_.clear();
  solved_ = false;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Mat12> record_posevel_blocks(const LockedRecord& rec) {
  const int nodes = static_cast<int>(rec.mean.size());
  std::vector<Mat12> out(static_cast<size_t>(nodes));
  for (int j = 0; j < nodes; ++j) {
    out[static_cast<size_t>(j)] = rec.covariance.block<12, 12>(kNodeDim * j, kNodeDim * j);
  }
  return out;
}

}  // namespace

ContinuousEstimate query_continuous(const std::vector<LockedRecord>& records, double tau,
                                    const Mat6& qc_time, bool want_covariance) {
  if (records.empty()) throw EmptyOverlap("no locked records");
  constexpr double eps = 1e-12;
  if (tau < records.front().timestamp - eps || tau > records.back().timestamp + eps) {
    throw TimestampOutsideInterval(tau, records.front().timestamp, records.back().timestamp);
  }

  ContinuousEstimate out;
  out.timestamp = tau;

  // Exact hits return the record itself.
  auto it = std::lower_bound(records.begin(), records.end(), tau - eps,
                             [](const LockedRecord& r, double t) { return r.timestamp < t; });
  if (it != records.end() && std::abs(it->timestamp - tau) <= eps) {
    out.mean = it->mean;
    if (want_covariance) out.covariance = record_posevel_blocks(*it);
    return out;
  }

  const LockedRecord& a = *std::prev(it);
  const LockedRecord& b = *it;
  const int nodes = static_cast<int>(a.mean.size());
  out.mean.resize(static_cast<size_t>(nodes));
  for (int j = 0; j < nodes; ++j) {
    out.mean[static_cast<size_t>(j)] = interp_mean(a.mean[static_cast<size_t>(j)], a.timestamp,
                                                   b.mean[static_cast<size_t>(j)], b.timestamp,
                                                   tau);
  }
  if (want_covariance) {
    if (!a.joint_with_next.has_value()) {
      throw MissingJointCovariance(
          "no joint neighbor covariance stored (filter mode does not support "
          "continuous-time covariance queries)");
    }
    out.covariance.resize(static_cast<size_t>(nodes));
    for (int j = 0; j < nodes; ++j) {
      out.covariance[static_cast<size_t>(j)] =
          interp_covariance(*a.joint_with_next, tau, j, qc_time);
    }
  }
  return out;
}

double covariance_discontinuity(const std::vector<LockedRecord>& records,
                                const Mat6& qc_time) {
  double worst = 0.0;
  for (size_t i = 0; i + 1 < records.size(); ++i) {
    if (!records[i].joint_with_next.has_value()) continue;
    const std::vector<Mat12> own = record_posevel_blocks(records[i + 1]);
    for (int j = 0; j < static_cast<int>(own.size()); ++j) {
      const Mat12 from_left = interp_covariance(*records[i].joint_with_next,
                                                records[i + 1].timestamp, j, qc_time);
      worst = std::max(worst,
                       (from_left - own[static_cast<size_t>(j)]).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace crest
