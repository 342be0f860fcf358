#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "crest/sim.hpp"
#include "oracles.hpp"

using namespace crest;
using namespace crest::sim;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("integrate_shape: straight rod and constant curvature") {
  Twist tangent = Twist::Zero();
  tangent[0] = 1.0;
  const double L = 0.466;

  const std::vector<Pose> straight =
      integrate_shape([&](double) { return tangent; }, L, 201);
  CHECK((straight.back().translation - Vec3(L, 0, 0)).norm() < 1e-12);
  CHECK((straight.back().rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);

  // Constant curvature: tip on a circle of radius 1/kappa; closed form
  // exp(s * eps) is exact for the product of identical exponentials.
  const double kappa = 3.14159265358979323846 / (2.0 * L);  // quarter turn
  Twist arc = tangent;
  arc[5] = kappa;
  const std::vector<Pose> bent = integrate_shape([&](double) { return arc; }, L, 801);
  const Pose closed_form = exp_se3(Twist(L * arc));
  CHECK((bent.back().matrix() - closed_form.matrix()).cwiseAbs().maxCoeff() < 1e-9);
  // Tip tangent rotated by pi/2 about z.
  CHECK(std::abs(bent.back().rotation(0, 0)) < 1e-9);
  CHECK(bent.back().rotation(1, 0) == doctest::Approx(1.0).epsilon(1e-9));
  // Chord radius check: |tip - center| with center at (0, 1/kappa).
  const double r = 1.0 / kappa;
  CHECK((bent.back().translation - Vec3(0, r, 0)).norm() == doctest::Approx(r).epsilon(1e-9));
}

TEST_CASE("integrate_shape: refinement convergence for a smooth profile") {
  const double L = 0.466;
  auto field = [&](double s) {
    Twist eps = Twist::Zero();
    eps[0] = 1.0;
    eps[4] = 0.5 * std::sin(2.0 * s / L);
    eps[5] = 0.6 * std::cos(1.3 * s / L);
    return eps;
  };
  const std::vector<Pose> coarse = integrate_shape(field, L, 32001);
  const std::vector<Pose> fine = integrate_shape(field, L, 64001);
  CHECK((coarse.back().translation - fine.back().translation).norm() < 1e-6);
}

TEST_CASE("generate: constant profile is stationary") {
  TrajectoryConfig cfg = profile_trajectory("constant");
  cfg.duration = 0.5;
  cfg.nodes = 3;
  const GroundTruth truth = generate(cfg);
  REQUIRE(truth.slices.size() > 10);
  const TimeSlice& first = truth.slices.front();
  for (const TimeSlice& s : truth.slices) {
    for (size_t j = 0; j < s.nodes.size(); ++j) {
      CHECK((s.nodes[j].pose.matrix() - first.nodes[j].pose.matrix()).cwiseAbs().maxCoeff() <
            1e-9);
      CHECK(s.nodes[j].velocity.cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("generate: pose increments are consistent with stored velocities") {
  TrajectoryConfig cfg = profile_trajectory("slow");
  cfg.duration = 0.4;
  cfg.nodes = 3;
  const GroundTruth truth = generate(cfg);
  const double dt = 1.0 / cfg.truth_hz;
  for (size_t i = 1; i + 1 < truth.slices.size(); ++i) {
    for (size_t j = 0; j < truth.slices[i].nodes.size(); ++j) {
      const Twist inc = log_se3(truth.slices[i + 1].nodes[j].pose *
                                truth.slices[i].nodes[j].pose.inverse());
      // Trapezoidal prediction from the stored endpoint velocities.
      const Twist pred = 0.5 * dt * (truth.slices[i].nodes[j].velocity +
                                     truth.slices[i + 1].nodes[j].velocity);
      CHECK((inc - pred).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("generate: impulse profile localizes the velocity spike") {
  TrajectoryConfig cfg = profile_trajectory("impulse1");
  cfg.duration = 6.0;
  cfg.nodes = 3;
  cfg.truth_hz = 50.0;
  const GroundTruth truth = generate(cfg);

  double inside = 0.0, outside = 0.0;
  for (const TimeSlice& s : truth.slices) {
    const double v = s.nodes.back().velocity.norm();
    if (std::abs(s.timestamp - cfg.impulse_time) < 3.0 * cfg.impulse_width) {
      inside = std::max(inside, v);
    } else if (std::abs(s.timestamp - cfg.impulse_time) > 1.0 && s.timestamp > 1.5) {
      outside = std::max(outside, v);
    }
  }
  CHECK(inside > 3.0 * outside);
}

TEST_CASE("synthesize: zero noise reproduces the truth exactly") {
  TrajectoryConfig cfg = profile_trajectory("slow");
  cfg.duration = 0.5;
  cfg.nodes = 3;
  SensorConfig sensors;
  sensors.sigma_pos = 0.0;  // degenerate for the factor path, fine for synthesis
  sensors.sigma_rot = 0.0;
  sensors.sigma_gyro = 0.0;
  const GroundTruth truth = generate(cfg);
  const std::vector<Measurement> ms = synthesize(truth, sensors);
  REQUIRE(!ms.empty());
  for (const Measurement& m : ms) {
    const std::vector<NodeState> states = truth_states(cfg, m.timestamp);
    const NodeState& target = states[static_cast<size_t>(m.node_index)];
    if (m.kind == MeasurementKind::Gyro) {
      CHECK((m.angular_rate - target.velocity.tail<3>()).cwiseAbs().maxCoeff() == 0.0);
    } else {
      CHECK((m.pose.matrix() - target.pose.matrix()).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("synthesize: dropout removes tip poses only, inside the window only") {
  TrajectoryConfig cfg = profile_trajectory("dropout");
  cfg.duration = 8.0;
  cfg.nodes = 3;
  cfg.integration_substeps = 10;
  SensorConfig sensors = profile_sensors("dropout");
  sensors.dropout_start = 5.0;
  sensors.dropout_end = 6.0;
  const GroundTruth truth = generate(cfg);
  const std::vector<Measurement> ms = synthesize(truth, sensors);

  int tip_inside = 0, gyro_inside = 0, tip_outside = 0;
  for (const Measurement& m : ms) {
    const bool in = m.timestamp >= 5.0 && m.timestamp < 6.0;
    if (m.kind == MeasurementKind::TipPose) (in ? tip_inside : tip_outside)++;
    if (m.kind == MeasurementKind::Gyro && in) ++gyro_inside;
  }
  CHECK(tip_inside == 0);
  CHECK(tip_outside > 100);
  CHECK(gyro_inside > 40);
}

TEST_CASE("synthesize: measurement list is sorted with deterministic ties") {
  TrajectoryConfig cfg = profile_trajectory("fast");
  cfg.duration = 1.0;
  cfg.nodes = 3;
  cfg.integration_substeps = 10;
  const std::vector<Measurement> ms = synthesize(generate(cfg), SensorConfig{});
  for (size_t i = 1; i < ms.size(); ++i) {
    const bool ordered =
        ms[i - 1].timestamp < ms[i].timestamp ||
        (ms[i - 1].timestamp == ms[i].timestamp &&
         (static_cast<int>(ms[i - 1].kind) < static_cast<int>(ms[i].kind) ||
          (ms[i - 1].kind == ms[i].kind && ms[i - 1].node_index <= ms[i].node_index)));
    CHECK(ordered);
  }
}

TEST_CASE("synthesize: empirical noise level matches the configured sigma") {
  // Rotation noise off so translation residuals isolate sigma_pos.
  TrajectoryConfig cfg = profile_trajectory("constant");
  cfg.duration = 10.0;
  cfg.nodes = 3;
  cfg.integration_substeps = 8;
  SensorConfig sensors;
  sensors.pose_rate = 1000.0;
  sensors.sigma_pos = 1e-3;
  sensors.sigma_rot = 0.0;
  sensors.sigma_gyro = 0.01;
  const GroundTruth truth = generate(cfg);
  const std::vector<Measurement> ms = synthesize(truth, sensors);

  const std::vector<NodeState> tip_truth = truth_states(cfg, 1.0);  // stationary profile
  double sq = 0.0;
  long n = 0;
  for (const Measurement& m : ms) {
    if (m.kind != MeasurementKind::TipPose) continue;
    sq += (m.pose.translation -
           tip_truth[static_cast<size_t>(m.node_index)].pose.translation)
              .squaredNorm();
    n += 3;
  }
  REQUIRE(n > 10000);
  const double sigma = std::sqrt(sq / static_cast<double>(n));
  CHECK(sigma == doctest::Approx(1e-3).epsilon(0.05));
}

TEST_CASE("measurement csv roundtrip and determinism") {
  TrajectoryConfig cfg = profile_trajectory("slow");
  cfg.duration = 0.5;
  cfg.nodes = 3;
  cfg.integration_substeps = 10;
  const GroundTruth truth = generate(cfg);
  const std::vector<Measurement> ms = synthesize(truth, SensorConfig{});

  write_measurement_csv("test_meas_a.csv", ms);
  write_measurement_csv("test_meas_b.csv", ms);
  CHECK(slurp("test_meas_a.csv") == slurp("test_meas_b.csv"));

  const std::vector<Measurement> back = read_measurement_csv("test_meas_a.csv");
  REQUIRE(back.size() == ms.size());
  for (size_t i = 0; i < ms.size(); ++i) {
    CHECK(back[i].kind == ms[i].kind);
    CHECK(back[i].timestamp == ms[i].timestamp);
    CHECK(back[i].node_index == ms[i].node_index);
    if (ms[i].kind == MeasurementKind::Gyro) {
      CHECK((back[i].angular_rate - ms[i].angular_rate).cwiseAbs().maxCoeff() == 0.0);
    } else {
      CHECK((back[i].pose.matrix() - ms[i].pose.matrix()).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  // Same seed, fresh pipeline: byte-identical output.
  const GroundTruth truth2 = generate(cfg);
  write_measurement_csv("test_meas_c.csv", synthesize(truth2, SensorConfig{}));
  CHECK(slurp("test_meas_a.csv") == slurp("test_meas_c.csv"));

  std::remove("test_meas_a.csv");
  std::remove("test_meas_b.csv");
  std::remove("test_meas_c.csv");
}

TEST_CASE("measurement csv rejects malformed rows") {
  {
    std::ofstream out("test_meas_bad.csv", std::ios::binary);
    out << "kind,timestamp,node_index,v0,v1,v2,v3,v4,v5,v6,v7,v8,v9,v10,v11,v12,v13,v14,"
           "v15\n";
    out << "Gyro,0.5,2,0.1,oops,0.3,,,,,,,,,,,,,\n";
  }
  CHECK_THROWS_AS((void)read_measurement_csv("test_meas_bad.csv"), SchemaError);
  try {
    (void)read_measurement_csv("test_meas_bad.csv");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 2);
  }
  std::remove("test_meas_bad.csv");
}

TEST_CASE("profiles: all names build and differ") {
  for (const std::string& name : profile_names()) {
    const TrajectoryConfig cfg = profile_trajectory(name);
    CHECK(cfg.duration > 0.0);
  }
  CHECK_THROWS_AS((void)profile_trajectory("bogus"), ConfigError);
}
