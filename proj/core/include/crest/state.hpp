#pragma once

// The 2-D estimation grid (arc length x time): node states, perturbation
// indexing and the retraction applying Gauss-Newton updates.
//
// Perturbation vectors are ordered time-major, then space, 18 coordinates per
// node: [pose(6); velocity(6); strain(6)]. This keeps temporal factor blocks
// band-adjacent so the normal equations stay block-banded.

#include <string>
#include <vector>

#include <Eigen/Core>

#include "crest/lie.hpp"

namespace crest {

inline constexpr int kNodeDim = 18;
inline constexpr int kPoseDim = 6;

using Vec18 = Eigen::Matrix<double, 18, 1>;
using Mat18 = Eigen::Matrix<double, 18, 18>;

/// Pose, body velocity and strain of the robot at one (arc length, time)
/// grid point. Velocity is the time derivative, strain the arc-length
/// derivative, both as left twists of the pose.
struct NodeState {
  Pose pose;
  Twist velocity = Twist::Zero();
  Twist strain = Twist::Zero();
};

/// (time slice, arc-length node) address of a state on the grid. The time
/// index is global and monotone over the whole run; the window maps it onto
/// local offsets.
struct GridIndex {
  long time_index = 0;
  int space_index = 0;

  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

/// One instant of the grid: N node states ordered by arc length.
struct TimeSlice {
  double timestamp = 0.0;
  std::vector<NodeState> nodes;
};

/// Grid geometry shared by the estimator and the simulator.
struct StateConfig {
  int nodes = 5;             // N, states along the arc length
  double length = 0.466;     // L, robot length in meters
  double dt = 1.0 / 30.0;    // slice period in seconds

  double node_spacing() const { return length / (nodes - 1); }
  double arc_length(int j) const { return node_spacing() * j; }
};

/// Scalar offset of a node's perturbation block in the stacked window
/// perturbation vector: 18 * (N * local_time_index + space_index).
/// Throws IndexOutOfWindow when idx does not address a window slice.
int perturbation_offset(const GridIndex& idx, long first_time_index, long slice_count,
                        int nodes_per_slice);

/// Applies an 18-dim local update: pose <- exp(delta[0:6]) * pose (left
/// perturbation), velocity += delta[6:12], strain += delta[12:18].
NodeState retract(const NodeState& x, const Vec18& delta);

std::string state_csv_header();

/// Writes slices as CSV rows (t, s, 16 row-major pose entries, 6 velocity,
/// 6 strain), one row per node.
void write_state_csv(const std::string& path, const std::vector<TimeSlice>& slices,
                     const StateConfig& config);

/// Reads a state CSV back into slices; rows are grouped by timestamp in file
/// order. Throws SchemaError with the offending line number.
std::vector<TimeSlice> read_state_csv(const std::string& path);

}  // namespace crest
