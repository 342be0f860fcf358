#include "crest/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "crest/errors.hpp"

namespace crest {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r");
  size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= v.size()) {
    size_t pos = v.find(',', start);
    if (pos == std::string::npos) pos = v.size();
    std::string item = trim(std::string_view(v).substr(start, pos - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = pos + 1;
  }
  return out;
}

}  // namespace

sim::TrajectoryConfig RunConfig::trajectory() const {
  sim::TrajectoryConfig cfg = sim::profile_trajectory(profile);
  cfg.length = length;
  cfg.duration = duration;
  cfg.nodes = nodes;
  cfg.truth_hz = truth_hz;
  cfg.seed = seed;
  return cfg;
}

sim::SensorConfig RunConfig::sensors() const {
  sim::SensorConfig s = sim::profile_sensors(profile);
  s.pose_rate = pose_rate;
  s.gyro_rate = gyro_rate;
  s.sigma_pos = sigma_pos;
  s.sigma_rot = sigma_rot_deg * kDegToRad;
  s.sigma_gyro = sigma_gyro;
  s.base_pose_sensor = base_pose_sensor;
  if (dropout_start >= 0.0) s.dropout_start = dropout_start;
  if (dropout_end >= 0.0) s.dropout_end = dropout_end;
  return s;
}

StateConfig RunConfig::state_config() const {
  return StateConfig{nodes, length, 1.0 / rate};
}

SwfConfig RunConfig::swf_config() const {
  SwfConfig swf;
  swf.window_seconds = window_seconds;
  swf.dt = 1.0 / rate;
  if (extraction == "back") {
    swf.extraction = ExtractionPolicy::Back;
  } else if (extraction == "front") {
    swf.extraction = ExtractionPolicy::Front;
  } else {
    throw ConfigError("extraction must be 'back' or 'front'");
  }
  swf.max_iterations = max_iterations;
  swf.delta_tol = delta_tol;
  swf.init_sigma_pose = init_sigma_pose;
  swf.init_sigma_velocity = init_sigma_velocity;
  swf.init_sigma_strain = init_sigma_strain;
  return swf;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.boundary_sigma_pose = boundary_sigma_pose;
  m.boundary_sigma_velocity = boundary_sigma_velocity;
  m.sigma_pos = sigma_pos;
  m.sigma_rot = sigma_rot_deg * kDegToRad;
  m.sigma_gyro = sigma_gyro;
  m.use_base_pose_sensor = base_pose_sensor;
  return m;
}

PriorPowerSpectra RunConfig::spectra() const {
  PriorPowerSpectra sp;
  sp.qc_time = qc_time * Mat6::Identity();
  Twist d;
  d << qc_space_trans, qc_space_trans, qc_space_trans, qc_space_rot, qc_space_rot,
      qc_space_rot;
  sp.qc_space = d.asDiagonal();
  return sp;
}

std::string RunConfig::measurements_file() const {
  return measurements_path.empty() ? out_dir + "/" + profile + "_measurements.csv"
                                   : measurements_path;
}

std::string RunConfig::truth_file() const {
  return truth_path.empty() ? out_dir + "/" + profile + "_truth.csv" : truth_path;
}

std::string RunConfig::output_file(const std::string& kind) const {
  return out_dir + "/" + profile + "_" + kind + ".csv";
}

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "profile") cfg.profile = value;
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_double(value));
  else if (key == "duration") cfg.duration = to_double(value);
  else if (key == "length") cfg.length = to_double(value);
  else if (key == "nodes") cfg.nodes = static_cast<int>(to_double(value));
  else if (key == "truth_hz") cfg.truth_hz = to_double(value);
  else if (key == "pose_rate") cfg.pose_rate = to_double(value);
  else if (key == "gyro_rate") cfg.gyro_rate = to_double(value);
  else if (key == "sigma_pos") cfg.sigma_pos = to_double(value);
  else if (key == "sigma_rot_deg") cfg.sigma_rot_deg = to_double(value);
  else if (key == "sigma_gyro") cfg.sigma_gyro = to_double(value);
  else if (key == "base_pose_sensor") cfg.base_pose_sensor = to_bool(value);
  else if (key == "dropout_start") cfg.dropout_start = to_double(value);
  else if (key == "dropout_end") cfg.dropout_end = to_double(value);
  else if (key == "window_seconds") cfg.window_seconds = to_double(value);
  else if (key == "rate") cfg.rate = to_double(value);
  else if (key == "max_iterations") cfg.max_iterations = static_cast<int>(to_double(value));
  else if (key == "delta_tol") cfg.delta_tol = to_double(value);
  else if (key == "extraction") cfg.extraction = value;
  else if (key == "qc_time") cfg.qc_time = to_double(value);
  else if (key == "qc_space_trans") cfg.qc_space_trans = to_double(value);
  else if (key == "qc_space_rot") cfg.qc_space_rot = to_double(value);
  else if (key == "init_sigma_pose") cfg.init_sigma_pose = to_double(value);
  else if (key == "init_sigma_velocity") cfg.init_sigma_velocity = to_double(value);
  else if (key == "init_sigma_strain") cfg.init_sigma_strain = to_double(value);
  else if (key == "boundary_sigma_pose") cfg.boundary_sigma_pose = to_double(value);
  else if (key == "boundary_sigma_velocity") cfg.boundary_sigma_velocity = to_double(value);
  else if (key == "out") cfg.out_dir = value;
  else if (key == "measurements") cfg.measurements_path = value;
  else if (key == "ground_truth") cfg.truth_path = value;
  else if (key == "sweep_windows") {
    cfg.sweep_windows.clear();
    for (const std::string& w : split_list(value)) cfg.sweep_windows.push_back(to_double(w));
  } else if (key == "sweep_profiles") {
    cfg.sweep_profiles = split_list(value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + " is not 'key = value'");
    }
    const std::string key = trim(std::string_view(trimmed).substr(0, eq));
    const std::string value = trim(std::string_view(trimmed).substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + " is not 'key = value'");
    }
    apply_config_entry(base, key, value);
  }
  return base;
}

}  // namespace crest
