#pragma once

// Run configuration shared by the CLI commands. Config files are flat UTF-8
// `key = value` lines ('#' starts a comment); command-line flags override
// file values. Every random choice in a run flows from the single seed here.

#include <cstdint>
#include <string>
#include <vector>

#include "crest/factors.hpp"
#include "crest/sim.hpp"
#include "crest/window.hpp"

namespace crest {

struct RunConfig {
  // simulation
  std::string profile = "slow";
  std::uint64_t seed = 42;
  double duration = 10.0;
  double length = 0.466;
  int nodes = 5;
  double truth_hz = 200.0;
  double pose_rate = 40.0;
  double gyro_rate = 50.0;
  double sigma_pos = 1e-3;
  double sigma_rot_deg = 0.5;
  double sigma_gyro = 0.01;
  bool base_pose_sensor = false;
  double dropout_start = -1.0;  // negative = profile default
  double dropout_end = -1.0;

  // estimator
  double window_seconds = 0.1;
  double rate = 30.0;  // slice rate, Hz
  int max_iterations = 10;
  double delta_tol = 1e-6;
  std::string extraction = "back";
  double qc_time = 100.0;
  double qc_space_trans = 1e-2;
  double qc_space_rot = 1.0;
  double init_sigma_pose = 0.1;
  double init_sigma_velocity = 1.0;
  double init_sigma_strain = 1.0;
  double boundary_sigma_pose = 1e-4;
  double boundary_sigma_velocity = 1e-4;

  // io
  std::string out_dir = "out";
  std::string measurements_path;  // default: {out}/{profile}_measurements.csv
  std::string truth_path;         // default: {out}/{profile}_truth.csv

  // sweep
  std::vector<double> sweep_windows = {0.0, 0.033, 0.066, 0.1, 0.2};
  std::vector<std::string> sweep_profiles = {"slow", "fast", "impulse1", "impulse2",
                                             "dropout"};

  sim::TrajectoryConfig trajectory() const;
  sim::SensorConfig sensors() const;
  StateConfig state_config() const;
  SwfConfig swf_config() const;
  ModelConfig model_config() const;
  PriorPowerSpectra spectra() const;

  std::string measurements_file() const;
  std::string truth_file() const;
  std::string output_file(const std::string& kind) const;  // {out}/{profile}_{kind}.csv
};

/// Applies `key = value` lines from a config file on top of `base`.
/// Unknown keys raise ConfigError.
RunConfig load_config_file(const std::string& path, RunConfig base = {});

/// Applies a single key/value pair (also used by the file loader).
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace crest
