#include "crest/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "crest/csv.hpp"
#include "crest/errors.hpp"

namespace crest {
namespace sim {

namespace {

constexpr double kTau = 2.0 * 3.14159265358979323846;

/// Deterministic standard-normal stream; explicit Box-Muller over mt19937_64
/// so identical seeds reproduce byte-identical files regardless of the
/// standard library's distribution internals.
class GaussStream {
 public:
  explicit GaussStream(std::uint64_t seed) : eng_(seed) {}

  double uniform() {  // (0, 1]
    return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTau * u2);
  }

  Vec3 normal3(double sigma) {
    return sigma * Vec3(normal(), normal(), normal());
  }

 private:
  std::mt19937_64 eng_;
};

double smooth_ramp(double t, double width) {
  if (t <= 0.0) return 0.0;
  if (t >= width) return 1.0;
  const double x = t / width;
  return x * x * (3.0 - 2.0 * x);
}

}  // namespace

Twist strain_field(const TrajectoryConfig& cfg, double s, double t) {
  Twist eps = Twist::Zero();
  eps[0] = 1.0;  // unit tangent along local x
  const double u = s / cfg.length;
  switch (cfg.family) {
    case ProfileFamily::Constant:
      eps[5] = cfg.amplitude;
      break;
    case ProfileFamily::SinusoidalSweep:
    case ProfileFamily::DropoutSweep: {
      // Ramp in from the straight-rod bootstrap configuration.
      const double ramp = smooth_ramp(t, 0.8);
      const double w = kTau * cfg.frequency;
      eps[5] = ramp * cfg.amplitude * std::sin(w * t) * (0.4 + 0.6 * u);
      eps[4] = ramp * 0.6 * cfg.amplitude * std::sin(w * 0.8 * t + 0.9) * (0.3 + 0.5 * u);
      eps[3] = ramp * 0.15 * cfg.amplitude * std::sin(w * 0.5 * t + 0.4);
      if (cfg.harmonic > 0.0) {
        eps[5] += ramp * cfg.harmonic * std::sin(3.7 * w * t + 1.3) * u;
        eps[4] += ramp * cfg.harmonic * std::cos(4.3 * w * t) * (0.2 + 0.6 * u);
      }
      break;
    }
    case ProfileFamily::Impulse: {
      const double ramp = smooth_ramp(t, 0.8);
      eps[5] = ramp * cfg.amplitude * (0.4 + 0.6 * u) * std::sin(kTau * 0.1 * t);
      const double dt = t - cfg.impulse_time;
      const double bump = std::exp(-0.5 * dt * dt / (cfg.impulse_width * cfg.impulse_width));
      eps[4] += cfg.impulse_amplitude * bump * u;
      eps[5] += 0.5 * cfg.impulse_amplitude * bump * (1.0 - u);
      break;
    }
  }
  return eps;
}

std::vector<Pose> integrate_shape(const std::function<Twist(double)>& strain_at,
                                  double length, int n_fine, const Pose& base) {
  std::vector<Pose> out(static_cast<size_t>(n_fine));
  out[0] = base;
  const double ds = length / (n_fine - 1);
  for (int k = 0; k + 1 < n_fine; ++k) {
    const double s = ds * k;
    out[static_cast<size_t>(k) + 1] =
        out[static_cast<size_t>(k)] * exp_se3(Twist(ds * strain_at(s)));
  }
  return out;
}

namespace {

std::vector<Pose> node_poses(const TrajectoryConfig& cfg, double t) {
  const int sub = cfg.integration_substeps;
  const int n_fine = sub * (cfg.nodes - 1) + 1;
  const std::vector<Pose> fine = integrate_shape(
      [&](double s) { return strain_field(cfg, s, t); }, cfg.length, n_fine);
  std::vector<Pose> out(static_cast<size_t>(cfg.nodes));
  for (int j = 0; j < cfg.nodes; ++j) out[static_cast<size_t>(j)] = fine[static_cast<size_t>(j * sub)];
  return out;
}

}  // namespace

std::vector<NodeState> truth_states(const TrajectoryConfig& cfg, double t) {
  const double h = 5e-4;  // velocity finite-difference half step
  const std::vector<Pose> now = node_poses(cfg, t);
  const std::vector<Pose> before = node_poses(cfg, t - h);
  const std::vector<Pose> after = node_poses(cfg, t + h);
  std::vector<NodeState> out(static_cast<size_t>(cfg.nodes));
  for (int j = 0; j < cfg.nodes; ++j) {
    NodeState n;
    n.pose = now[static_cast<size_t>(j)];
    n.velocity =
        log_se3(after[static_cast<size_t>(j)] * before[static_cast<size_t>(j)].inverse()) /
        (2.0 * h);
    n.strain = adjoint(n.pose) * strain_field(cfg, cfg.grid().arc_length(j), t);
    out[static_cast<size_t>(j)] = n;
  }
  return out;
}

GroundTruth generate(const TrajectoryConfig& cfg) {
  GroundTruth truth;
  truth.config = cfg;
  const double dt = 1.0 / cfg.truth_hz;
  const long count = static_cast<long>(std::floor(cfg.duration * cfg.truth_hz)) + 1;
  truth.slices.reserve(static_cast<size_t>(count));
  for (long i = 0; i < count; ++i) {
    TimeSlice slice;
    slice.timestamp = dt * static_cast<double>(i);
    slice.nodes = truth_states(cfg, slice.timestamp);
    truth.slices.push_back(std::move(slice));
  }
  return truth;
}

std::vector<Measurement> synthesize(const GroundTruth& truth, const SensorConfig& sensors) {
  const TrajectoryConfig& cfg = truth.config;
  std::vector<Measurement> out;

  struct Stream {
    MeasurementKind kind;
    int node;
    double rate;
    std::uint64_t salt;
  };
  std::vector<Stream> streams;
  streams.push_back({MeasurementKind::TipPose, cfg.nodes - 1, sensors.pose_rate, 1});
  if (sensors.base_pose_sensor) {
    streams.push_back({MeasurementKind::BasePose, 0, sensors.pose_rate, 2});
  }
  streams.push_back({MeasurementKind::Gyro, (cfg.nodes - 1) / 2, sensors.gyro_rate, 3});
  streams.push_back({MeasurementKind::Gyro, cfg.nodes - 1, sensors.gyro_rate, 4});

  for (const Stream& st : streams) {
    GaussStream rng(cfg.seed * 0x9e3779b97f4a7c15ULL + st.salt);
    const double period = 1.0 / st.rate;
    const double phase = rng.uniform() * period;  // per-sensor phase jitter
    for (double tau = phase; tau < cfg.duration; tau += period) {
      if (st.kind == MeasurementKind::TipPose && tau >= sensors.dropout_start &&
          tau < sensors.dropout_end) {
        // Consume the same number of noise draws so the dropout window does
        // not shift the rest of the stream.
        rng.normal3(1.0);
        rng.normal3(1.0);
        continue;
      }
      const std::vector<NodeState> states = truth_states(cfg, tau);
      const NodeState& target = states[static_cast<size_t>(st.node)];
      Measurement m;
      m.kind = st.kind;
      m.timestamp = tau;
      m.node_index = st.node;
      if (st.kind == MeasurementKind::Gyro) {
        m.angular_rate = target.velocity.tail<3>() + rng.normal3(sensors.sigma_gyro);
        m.noise = sensors.sigma_gyro * sensors.sigma_gyro * Eigen::MatrixXd::Identity(3, 3);
      } else {
        Twist n;
        n.head<3>() = rng.normal3(sensors.sigma_pos);
        n.tail<3>() = rng.normal3(sensors.sigma_rot);
        m.pose = exp_se3(n) * target.pose;
        Eigen::VectorXd var(6);
        var.head<3>().setConstant(sensors.sigma_pos * sensors.sigma_pos);
        var.tail<3>().setConstant(sensors.sigma_rot * sensors.sigma_rot);
        m.noise = Eigen::MatrixXd(var.asDiagonal());
      }
      out.push_back(std::move(m));
    }
  }

  std::sort(out.begin(), out.end(), [](const Measurement& a, const Measurement& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    return a.node_index < b.node_index;
  });
  return out;
}

namespace {

std::string measurement_csv_header() {
  std::string h = "kind,timestamp,node_index";
  for (int i = 0; i < 16; ++i) h += ",v" + std::to_string(i);
  return h;
}

}  // namespace

void write_measurement_csv(const std::string& path, const std::vector<Measurement>& ms) {
  CsvWriter out(path, measurement_csv_header());
  std::vector<std::string> fields;
  for (const Measurement& m : ms) {
    fields.clear();
    fields.push_back(Measurement::kind_name(m.kind));
    fields.push_back(format_double(m.timestamp));
    fields.push_back(std::to_string(m.node_index));
    if (m.kind == MeasurementKind::Gyro) {
      for (int i = 0; i < 3; ++i) fields.push_back(format_double(m.angular_rate[i]));
      for (int i = 3; i < 16; ++i) fields.emplace_back();
    } else {
      const Mat4 p = m.pose.matrix();
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) fields.push_back(format_double(p(r, c)));
    }
    out.write_row(fields);
  }
}

std::vector<Measurement> read_measurement_csv(const std::string& path) {
  std::vector<Measurement> out;
  for (const auto& [lineno, row] : read_csv_rows(path, measurement_csv_header())) {
    const std::vector<std::string_view> f = split_csv_line(row);
    if (f.size() != 19) throw SchemaError("expected 19 fields", lineno);
    Measurement m;
    if (f[0] == "TipPose") {
      m.kind = MeasurementKind::TipPose;
    } else if (f[0] == "BasePose") {
      m.kind = MeasurementKind::BasePose;
    } else if (f[0] == "Gyro") {
      m.kind = MeasurementKind::Gyro;
    } else {
      throw SchemaError("unknown measurement kind '" + std::string(f[0]) + "'", lineno);
    }
    auto required = [lineno](std::optional<double> v) {
      if (!v.has_value()) throw SchemaError("missing required field", lineno);
      return *v;
    };
    m.timestamp = required(parse_double_field(f[1], lineno));
    m.node_index = static_cast<int>(required(parse_double_field(f[2], lineno)));
    if (m.kind == MeasurementKind::Gyro) {
      for (int i = 0; i < 3; ++i) {
        m.angular_rate[i] = required(parse_double_field(f[3 + static_cast<size_t>(i)], lineno));
      }
    } else {
      Mat4 p;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
          p(r, c) = required(parse_double_field(f[3 + static_cast<size_t>(4 * r + c)], lineno));
        }
      m.pose = Pose::from_matrix(p);
      if (m.pose.orthonormality_defect() > 1e-6) {
        throw SchemaError("pose rotation block is not orthonormal", lineno);
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

TrajectoryConfig profile_trajectory(const std::string& name) {
  TrajectoryConfig cfg;
  if (name == "constant") {
    cfg.family = ProfileFamily::Constant;
    cfg.amplitude = 2.0;
  } else if (name == "slow") {
    cfg.family = ProfileFamily::SinusoidalSweep;
    cfg.amplitude = 1.2;
    cfg.frequency = 0.15;
  } else if (name == "fast") {
    cfg.family = ProfileFamily::SinusoidalSweep;
    cfg.amplitude = 2.2;
    cfg.frequency = 0.7;
    cfg.harmonic = 0.8;
  } else if (name == "impulse1") {
    cfg.family = ProfileFamily::Impulse;
    cfg.amplitude = 1.2;
    cfg.impulse_time = 3.0;
    cfg.impulse_width = 0.12;
    cfg.impulse_amplitude = 3.0;
  } else if (name == "impulse2") {
    cfg.family = ProfileFamily::Impulse;
    cfg.amplitude = 1.0;
    cfg.impulse_time = 6.0;
    cfg.impulse_width = 0.08;
    cfg.impulse_amplitude = 4.0;
  } else if (name == "dropout") {
    cfg.family = ProfileFamily::DropoutSweep;
    cfg.amplitude = 1.5;
    cfg.frequency = 0.3;
  } else {
    throw ConfigError("unknown profile '" + name + "'");
  }
  return cfg;
}

SensorConfig profile_sensors(const std::string& name) {
  SensorConfig s;
  if (name == "dropout") {
    s.dropout_start = 4.0;
    s.dropout_end = 6.0;
  }
  return s;
}

const std::vector<std::string>& profile_names() {
  static const std::vector<std::string> names = {"slow", "fast", "impulse1", "impulse2",
                                                 "dropout"};
  return names;
}

}  // namespace sim
}  // namespace crest
