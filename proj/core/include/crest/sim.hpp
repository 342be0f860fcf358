#pragma once

// Synthetic ground truth and noisy asynchronous sensor streams for the desk
// evaluation harness. Ground truth is kinematic: a named strain-field profile
// is integrated along the arc length (product of exponentials), velocities
// come from central finite differences of the resulting poses, so the truth
// generator stays independent of the estimator's motion prior.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "crest/measurement.hpp"
#include "crest/state.hpp"

namespace crest {
namespace sim {

enum class ProfileFamily { Constant, SinusoidalSweep, Impulse, DropoutSweep };

struct TrajectoryConfig {
  double length = 0.466;   // m
  double duration = 10.0;  // s
  int nodes = 5;
  double truth_hz = 200.0;
  std::uint64_t seed = 42;

  ProfileFamily family = ProfileFamily::SinusoidalSweep;
  double amplitude = 1.5;      // curvature scale, 1/m
  double frequency = 0.15;     // sweep rate, Hz
  double harmonic = 0.0;       // extra high-frequency curvature content
  double impulse_time = 3.0;   // s
  double impulse_width = 0.12; // s
  double impulse_amplitude = 3.0;

  int integration_substeps = 40;  // shape-integration steps per node interval

  StateConfig grid() const { return StateConfig{nodes, length, 1.0 / truth_hz}; }
};

/// Body strain twist of the profile at (s, t).
Twist strain_field(const TrajectoryConfig& cfg, double s, double t);

struct SensorConfig {
  double pose_rate = 40.0;  // Hz
  double gyro_rate = 50.0;  // Hz
  double sigma_pos = 1e-3;  // m
  double sigma_rot = 0.5 * 3.14159265358979323846 / 180.0;  // rad
  double sigma_gyro = 0.01;  // rad/s
  bool base_pose_sensor = false;
  double dropout_start = 0.0;  // TipPose samples in [start, end) are dropped
  double dropout_end = 0.0;
};

struct GroundTruth {
  TrajectoryConfig config;
  std::vector<TimeSlice> slices;  // dense time grid, N nodes per slice
};

/// Integrates a strain field along the arc length at a fixed time:
/// T(s_{k+1}) = T(s_k) * exp(ds * eps(s_k)), ds = L/(n_fine - 1), base first.
std::vector<Pose> integrate_shape(const std::function<Twist(double)>& strain_at,
                                  double length, int n_fine,
                                  const Pose& base = Pose::Identity());

/// Node states of the configured profile at an arbitrary time: poses from
/// shape integration, velocities as central-difference left twists, strains
/// as the field transported into the estimator's (world-side) convention.
std::vector<NodeState> truth_states(const TrajectoryConfig& cfg, double t);

/// Dense deterministic ground-truth grid.
GroundTruth generate(const TrajectoryConfig& cfg);

/// Asynchronous noisy measurements: each sensor stream gets its own phase
/// (seeded), Gaussian noise is applied in the left-twist sense for poses,
/// additively for gyros, and TipPose samples inside the dropout window are
/// removed. Output is sorted by timestamp, ties broken by (kind, node).
std::vector<Measurement> synthesize(const GroundTruth& truth, const SensorConfig& sensors);

/// Measurement CSV: kind,timestamp,node_index,v0..v15. Pose kinds fill
/// v0..v15 with the row-major 4x4 transform, gyro fills v0..v2.
void write_measurement_csv(const std::string& path, const std::vector<Measurement>& ms);
std::vector<Measurement> read_measurement_csv(const std::string& path);

/// Named experiment profiles mirroring the evaluation roster:
/// slow, fast, impulse1, impulse2, dropout (plus constant for tests).
TrajectoryConfig profile_trajectory(const std::string& name);
SensorConfig profile_sensors(const std::string& name);
const std::vector<std::string>& profile_names();

}  // namespace sim
}  // namespace crest
