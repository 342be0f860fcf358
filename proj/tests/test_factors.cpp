#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crest/factors.hpp"
#include "oracles.hpp"

using namespace crest;

namespace {

Mat6 random_spd6(oracle::StateSampler& rng, double scale) {
  Eigen::MatrixXd a(6, 6);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) a(r, c) = rng.uniform(-1.0, 1.0);
  return scale * (a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(6, 6));
}

Measurement make_pose_meas(double tau, const Pose& pose) {
  Measurement m;
  m.kind = MeasurementKind::TipPose;
  m.timestamp = tau;
  m.node_index = 0;
  m.pose = pose;
  Eigen::VectorXd var(6);
  var << 1e-6, 1e-6, 1e-6, 1e-4, 1e-4, 1e-4;
  m.noise = Eigen::MatrixXd(var.asDiagonal());
  return m;
}

Measurement make_gyro_meas(double tau, const Vec3& rate) {
  Measurement m;
  m.kind = MeasurementKind::Gyro;
  m.timestamp = tau;
  m.node_index = 0;
  m.angular_rate = rate;
  m.noise = 1e-4 * Eigen::MatrixXd::Identity(3, 3);
  return m;
}

}  // namespace

TEST_CASE("wnoa kernel is SPD over the grid-step range and inverts exactly") {
  oracle::StateSampler rng(31);
  for (double h : {1e-3, 1.0 / 30.0, 0.1165, 1.0, 10.0}) {
    const Mat6 qc = random_spd6(rng, 1.0);
    const Mat12 q = wnoa_kernel(h, qc);
    const Mat12 qi = wnoa_kernel_inv(h, qc);
    CHECK((q * qi - Mat12::Identity()).cwiseAbs().maxCoeff() < 1e-8);
    Eigen::LLT<Mat12> llt(q);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("motion factor: stationary and constant-twist consistency") {
  NodeState a, b;
  const double dt = 1.0 / 30.0;
  const Mat6 qc = Mat6::Identity();

  auto ev = motion_error(a, b, dt, qc);
  CHECK(ev.error.cwiseAbs().maxCoeff() == 0.0);

  oracle::StateSampler rng(32);
  for (int i = 0; i < 20; ++i) {
    const Twist v = rng.twist(0.5, 0.5);
    NodeState xa, xb;
    xa.pose = exp_se3(rng.twist(1.0, 1.0));
    xa.velocity = v;
    xb.pose = exp_se3(Twist(dt * v)) * xa.pose;
    xb.velocity = v;
    const auto cv = motion_error(xa, xb, dt, qc);
    CHECK(cv.error.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("spatial factor: straight rod and constant-curvature arc") {
  const double ds = 0.1165;
  const Mat6 qc = Mat6::Identity();

  NodeState xa, xb;
  Twist tangent = Twist::Zero();
  tangent[0] = 1.0;
  xa.strain = tangent;
  xb.strain = tangent;
  xb.pose.translation = Vec3(ds, 0, 0);
  CHECK(spatial_error(xa, xb, ds, qc).error.cwiseAbs().maxCoeff() < 1e-14);

  // Constant-curvature arc about z, integrated exactly.
  const double kappa = 4.0;
  Twist arc = Twist::Zero();
  arc[0] = 1.0;
  arc[5] = kappa;
  NodeState ya, yb;
  ya.pose = exp_se3(Twist(0.2 * arc));  // somewhere along the arc
  ya.strain = adjoint(ya.pose) * arc;
  yb.pose = ya.pose * exp_se3(Twist(ds * arc));
  yb.strain = adjoint(yb.pose) * arc;
  CHECK(spatial_error(ya, yb, ds, qc).error.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("motion and spatial factors are exchange-symmetric bit-for-bit") {
  oracle::StateSampler rng(33);
  const double h = 0.07;
  const Mat6 qc = random_spd6(rng, 2.0);
  for (int i = 0; i < 20; ++i) {
    NodeState xa = rng.node();
    NodeState xb = rng.node();
    NodeState sa = xa, sb = xb;
    std::swap(sa.velocity, sa.strain);
    std::swap(sb.velocity, sb.strain);

    const auto m = motion_error(xa, xb, h, qc);
    const auto s = spatial_error(sa, sb, h, qc);
    CHECK((m.error - s.error).cwiseAbs().maxCoeff() == 0.0);
    // Jacobian blocks swap between the velocity and strain columns.
    CHECK((m.jac_a.leftCols<6>() - s.jac_a.leftCols<6>()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((m.jac_a.middleCols<6>(6) - s.jac_a.middleCols<6>(12)).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((m.jac_b.middleCols<6>(6) - s.jac_b.middleCols<6>(12)).cwiseAbs().maxCoeff() ==
          0.0);
  }
}

TEST_CASE("boundary factor: consistent base, linearization limit") {
  const Pose base = exp_se3(Twist::Constant(0.2));
  NodeState x0;
  x0.pose = base;
  const NoiseModel noise = NoiseModel::isotropic(12, 1e-3);
  CHECK(boundary_error(x0, base, noise).error.cwiseAbs().maxCoeff() < 1e-15);

  Twist d = Twist::Constant(1e-6 / std::sqrt(6.0));
  NodeState moved = x0;
  moved.pose = exp_se3(d) * x0.pose;
  const auto ev = boundary_error(moved, base, noise);
  CHECK((ev.error.head<6>() + d).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pose measurement factor: zero error and endpoint collapse") {
  oracle::StateSampler rng(34);
  const double ta = 0.0, tb = 1.0 / 30.0;
  NodeState xa = rng.node(0.5);
  NodeState xb = rng.node(0.5);
  const double tau = ta + 0.37 * (tb - ta);

  const NodeState mid = interp_mean(xa, ta, xb, tb, tau);
  auto ev = pose_measurement_error(xa, ta, xb, tb, make_pose_meas(tau, mid.pose));
  CHECK(ev.error.cwiseAbs().maxCoeff() < 1e-12);

  // tau = t_b reduces to a direct measurement of xb.
  const Pose y = exp_se3(rng.twist(0.1, 0.1)) * xb.pose;
  auto edge = pose_measurement_error(xa, ta, xb, tb, make_pose_meas(tb, y));
  const Twist direct = log_se3(y * xb.pose.inverse());
  CHECK((edge.error - direct).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(edge.jac_a.cwiseAbs().maxCoeff() < 1e-10);  // left endpoint drops out

  CHECK_THROWS_AS(
      (void)pose_measurement_error(xa, ta, xb, tb, make_pose_meas(tb + 1e-3, y)),
      TimestampOutsideInterval);
}

TEST_CASE("gyro factor: zero error cases") {
  oracle::StateSampler rng(35);
  const double ta = 0.0, tb = 1.0 / 30.0;
  const double tau = ta + 0.61 * (tb - ta);

  NodeState xa = rng.node(0.5);
  NodeState xb = rng.node(0.5);
  const NodeState mid = interp_mean(xa, ta, xb, tb, tau);
  auto ev = gyro_measurement_error(xa, ta, xb, tb,
                                   make_gyro_meas(tau, Vec3(mid.velocity.tail<3>())));
  CHECK(ev.error.cwiseAbs().maxCoeff() < 1e-13);

  NodeState still_a, still_b;  // stationary robot, zero measurement
  auto still =
      gyro_measurement_error(still_a, ta, still_b, tb, make_gyro_meas(tau, Vec3::Zero()));
  CHECK(still.error.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("all factor jacobians match central finite differences") {
  oracle::StateSampler rng(36);
  const double dt = 1.0 / 30.0;
  const double ds = 0.1165;
  const Mat6 qct = random_spd6(rng, 3.0);
  const Mat6 qcs = random_spd6(rng, 1.0);
  const Pose base = exp_se3(Twist::Constant(0.1));
  const NoiseModel bnoise = NoiseModel::isotropic(12, 1e-2);

  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const NodeState xa = rng.node(0.7);
    const NodeState xb = rng.node(0.7);
    const double tau = dt * rng.uniform(0.05, 1.0);

    {
      const auto ev = motion_error(xa, xb, dt, qct);
      worst = std::max(worst, oracle::fd_check(
          [&](const NodeState& s) { return Eigen::VectorXd(motion_error(s, xb, dt, qct).error); },
          xa, ev.jac_a));
      worst = std::max(worst, oracle::fd_check(
          [&](const NodeState& s) { return Eigen::VectorXd(motion_error(xa, s, dt, qct).error); },
          xb, ev.jac_b));
    }
    {
      const auto ev = spatial_error(xa, xb, ds, qcs);
      worst = std::max(worst, oracle::fd_check(
          [&](const NodeState& s) { return Eigen::VectorXd(spatial_error(s, xb, ds, qcs).error); },
          xa, ev.jac_a));
      worst = std::max(worst, oracle::fd_check(
          [&](const NodeState& s) { return Eigen::VectorXd(spatial_error(xa, s, ds, qcs).error); },
          xb, ev.jac_b));
    }
    {
      const auto ev = boundary_error(xa, base, bnoise);
      worst = std::max(worst, oracle::fd_check(
          [&](const NodeState& s) { return Eigen::VectorXd(boundary_error(s, base, bnoise).error); },
          xa, ev.jac));
    }
    {
      const Measurement m = make_pose_meas(tau, exp_se3(rng.twist(0.3, 0.3)));
      const auto ev = pose_measurement_error(xa, 0.0, xb, dt, m);
      worst = std::max(worst, oracle::fd_check(
          [&](const NodeState& s) {
            return Eigen::VectorXd(pose_measurement_error(s, 0.0, xb, dt, m).error);
          },
          xa, ev.jac_a));
      worst = std::max(worst, oracle::fd_check(
          [&](const NodeState& s) {
            return Eigen::VectorXd(pose_measurement_error(xa, 0.0, s, dt, m).error);
          },
          xb, ev.jac_b));
    }
    {
      const Measurement m = make_gyro_meas(tau, Vec3(rng.twist(1.0, 1.0).tail<3>()));
      const auto ev = gyro_measurement_error(xa, 0.0, xb, dt, m);
      worst = std::max(worst, oracle::fd_check(
          [&](const NodeState& s) {
            return Eigen::VectorXd(gyro_measurement_error(s, 0.0, xb, dt, m).error);
          },
          xa, ev.jac_a));
      worst = std::max(worst, oracle::fd_check(
          [&](const NodeState& s) {
            return Eigen::VectorXd(gyro_measurement_error(xa, 0.0, s, dt, m).error);
          },
          xb, ev.jac_b));
    }
  }
  CHECK(worst < 1e-5);
  MESSAGE("worst relative FD deviation: ", worst);
}

TEST_CASE("marginal prior factor reproduces its quadratic form") {
  oracle::StateSampler rng(37);
  const int n = 2 * kNodeDim;
  Eigen::MatrixXd a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = rng.uniform(-1.0, 1.0);
  const Eigen::MatrixXd H = a * a.transpose() + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd h(n);
  for (int i = 0; i < n; ++i) h[i] = rng.uniform(-1.0, 1.0);

  std::vector<NodeState> anchor = {rng.node(0.4), rng.node(0.4)};
  const MarginalPriorFactor prior(0, anchor, H, h);

  // Whitened error reproduces 0.5 d^T H d - h^T d up to the constant.
  std::vector<NodeState> states = {rng.node(0.4), rng.node(0.4)};
  std::vector<const NodeState*> ptrs = {&states[0], &states[1]};
  const Eigen::VectorXd d = prior.local_offset(ptrs);
  const FactorEval ev = prior.evaluate(ptrs);
  const double c0 = 0.5 * h.dot(H.ldlt().solve(h));  // constant term of the square
  CHECK(0.5 * ev.error.squaredNorm() ==
        doctest::Approx(0.5 * d.dot(H * d) - h.dot(d) + c0).epsilon(1e-9));

  // Jacobians against finite differences through the retraction.
  for (int which = 0; which < 2; ++which) {
    const double rel = oracle::fd_check(
        [&](const NodeState& s) {
          std::vector<const NodeState*> p = ptrs;
          p[static_cast<size_t>(which)] = &s;
          return prior.evaluate(p).error;
        },
        states[static_cast<size_t>(which)], ev.jacobians[static_cast<size_t>(which)]);
    CHECK(rel < 1e-5);
  }

  // Anchored at the states with h = 0, the factor carries no pull.
  const MarginalPriorFactor centered(0, states, H, Eigen::VectorXd::Zero(n));
  CHECK(centered.evaluate(ptrs).error.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("noise model rejects bad inputs") {
  CHECK_THROWS_AS(NoiseModel::from_information(-Eigen::MatrixXd::Identity(3, 3)),
                  SingularNoise);
  Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(3, 3);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(NoiseModel::from_information(asym), SingularNoise);
  CHECK_THROWS_AS(NoiseModel::isotropic(3, 0.0), SingularNoise);
}
