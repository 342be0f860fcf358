#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "crest/metrics.hpp"
#include "oracles.hpp"

using namespace crest;
using namespace crest::metrics;

namespace {

// Hand-built locked records: exact-hit timestamps so interpolation is not in
// play unless a test wants it.
std::vector<LockedRecord> records_from_truth(const std::vector<TimeSlice>& truth,
                                             double pos_offset, double rot_offset,
                                             double var) {
  std::vector<LockedRecord> records;
  const int nodes = static_cast<int>(truth.front().nodes.size());
  for (const TimeSlice& ts : truth) {
    LockedRecord r;
    r.timestamp = ts.timestamp;
    r.mean = ts.nodes;
    for (NodeState& n : r.mean) {
      n.pose.translation.y() += pos_offset;
      n.pose.rotation = (exp_so3(Vec3(0, 0, rot_offset)) * n.pose.rotation).eval();
    }
    r.covariance = var * Eigen::MatrixXd::Identity(kNodeDim * nodes, kNodeDim * nodes);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<TimeSlice> synthetic_truth(int nodes, int count, double dt) {
  oracle::StateSampler rng(71);
  std::vector<TimeSlice> truth;
  for (int i = 0; i < count; ++i) {
    TimeSlice s;
    s.timestamp = i * dt;
    for (int j = 0; j < nodes; ++j) s.nodes.push_back(rng.node(0.3));
    truth.push_back(std::move(s));
  }
  return truth;
}

}  // namespace

TEST_CASE("tip rmse: exact estimates give zero") {
  const std::vector<TimeSlice> truth = synthetic_truth(3, 20, 1.0 / 30.0);
  const std::vector<LockedRecord> records = records_from_truth(truth, 0.0, 0.0, 1e-6);
  const auto [pos, rot] = tip_rmse(records, truth, 0.466, Mat6::Identity());
  CHECK(pos == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rot == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("tip rmse: constant offsets normalize as specified") {
  const std::vector<TimeSlice> truth = synthetic_truth(3, 20, 1.0 / 30.0);
  // 4.66 mm on a 466 mm robot is exactly 1 percent.
  const std::vector<LockedRecord> a = records_from_truth(truth, 4.66e-3, 0.0, 1e-6);
  const auto [pos_pct, rot0] = tip_rmse(a, truth, 0.466, Mat6::Identity());
  CHECK(pos_pct == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rot0 == doctest::Approx(0.0).epsilon(1e-9));

  const std::vector<LockedRecord> b = records_from_truth(truth, 0.0, 0.05, 1e-6);
  const auto [pos0, rot] = tip_rmse(b, truth, 0.466, Mat6::Identity());
  CHECK(rot == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(pos0 == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("tip rmse is invariant to a global rigid transform") {
  const std::vector<TimeSlice> truth = synthetic_truth(3, 15, 1.0 / 30.0);
  std::vector<LockedRecord> records = records_from_truth(truth, 2e-3, 0.01, 1e-6);
  const auto [pos_a, rot_a] = tip_rmse(records, truth, 0.466, Mat6::Identity());

  oracle::StateSampler rng(72);
  const Pose g = exp_se3(rng.twist(1.0, 1.0));
  std::vector<TimeSlice> truth_g = truth;
  std::vector<LockedRecord> records_g = records;
  for (TimeSlice& s : truth_g)
    for (NodeState& n : s.nodes) n.pose = g * n.pose;
  for (LockedRecord& r : records_g)
    for (NodeState& n : r.mean) n.pose = g * n.pose;

  const auto [pos_b, rot_b] = tip_rmse(records_g, truth_g, 0.466, Mat6::Identity());
  CHECK(pos_a == doctest::Approx(pos_b).epsilon(1e-9));
  CHECK(rot_a == doctest::Approx(rot_b).epsilon(1e-9));
}

TEST_CASE("tip rmse: disjoint spans raise EmptyOverlap") {
  const std::vector<TimeSlice> truth = synthetic_truth(3, 5, 1.0 / 30.0);
  std::vector<LockedRecord> records = records_from_truth(truth, 0.0, 0.0, 1e-6);
  std::vector<TimeSlice> late = truth;
  for (TimeSlice& s : late) s.timestamp += 100.0;
  CHECK_THROWS_AS((void)tip_rmse(records, late, 0.466, Mat6::Identity()), EmptyOverlap);
}

TEST_CASE("nees: zero error gives zero, covariance scaling divides") {
  const std::vector<TimeSlice> truth = synthetic_truth(2, 25, 1.0 / 30.0);
  const std::vector<LockedRecord> exact = records_from_truth(truth, 0.0, 0.0, 1e-4);
  CHECK(avg_nees(exact, truth, Mat6::Identity()) == doctest::Approx(0.0).epsilon(1e-12));

  const std::vector<LockedRecord> off = records_from_truth(truth, 1e-3, 2e-3, 1e-4);
  const double n1 = avg_nees(off, truth, Mat6::Identity());
  const std::vector<LockedRecord> wide = records_from_truth(truth, 1e-3, 2e-3, 4e-4);
  const double n4 = avg_nees(wide, truth, Mat6::Identity());
  CHECK(n1 == doctest::Approx(4.0 * n4).epsilon(1e-9));
}

TEST_CASE("nees: errors sampled from the reported gaussian average near six") {
  // Chi-square concentration: 1e4 six-dof samples.
  const int nodes = 2;
  std::vector<TimeSlice> truth = synthetic_truth(nodes, 10000, 1e-3);
  std::vector<LockedRecord> records;
  std::mt19937_64 eng(99);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sigma = 3e-3;
  for (const TimeSlice& ts : truth) {
    LockedRecord r;
    r.timestamp = ts.timestamp;
    r.mean = ts.nodes;
    for (NodeState& n : r.mean) {
      Twist d;
      for (int k = 0; k < 6; ++k) d[k] = sigma * gauss(eng);
      n.pose = exp_se3(d) * n.pose;
    }
    r.covariance = sigma * sigma *
                   Eigen::MatrixXd::Identity(kNodeDim * nodes, kNodeDim * nodes);
    records.push_back(std::move(r));
  }
  const double nees = avg_nees(records, truth, Mat6::Identity());
  CHECK(nees > 5.7);
  CHECK(nees < 6.3);
}

TEST_CASE("runtime stats: means, percentiles, capability flag") {
  auto make = [](std::vector<double> ms) {
    std::vector<SolveReport> out;
    for (double m : ms) {
      SolveReport r;
      r.wall_ms = m;
      out.push_back(r);
    }
    return out;
  };

  const RuntimeStats all10 = runtime_stats(make(std::vector<double>(100, 10.0)));
  CHECK(all10.mean_ms == doctest::Approx(10.0));
  CHECK(all10.real_time_capable);

  std::vector<double> with_outlier(99, 10.0);
  with_outlier.push_back(50.0);
  const RuntimeStats outlier = runtime_stats(make(with_outlier));
  CHECK(outlier.mean_ms == doctest::Approx(10.4));
  CHECK(outlier.p99_ms >= 10.0);
  CHECK(outlier.real_time_capable);

  const RuntimeStats slow = runtime_stats(make(std::vector<double>(50, 40.0)));
  CHECK_FALSE(slow.real_time_capable);
}

TEST_CASE("evaluate: full report with and without joints") {
  const std::vector<TimeSlice> truth = synthetic_truth(3, 30, 1.0 / 30.0);
  std::vector<LockedRecord> records = records_from_truth(truth, 1e-3, 1e-3, 1e-5);
  std::vector<SolveReport> reports(30);
  for (SolveReport& r : reports) r.wall_ms = 5.0;

  // No joints anywhere: NEES must be reported as N/A.
  const EvalReport no_joints = evaluate(records, truth, 0.466, Mat6::Identity(), reports);
  CHECK(!no_joints.avg_nees.has_value());
  CHECK(no_joints.tip_pos_rmse_pct > 0.0);
  CHECK(no_joints.per_node_pos_rmse_m.size() == 3);
  CHECK(no_joints.runtime.real_time_capable);
  const std::string table = report_table("trial", no_joints);
  CHECK(table.find("N/A") != std::string::npos);

  // Exact-hit queries work once any record carries a joint.
  JointNeighborCovariance jn;
  jn.t_a = records[0].timestamp;
  jn.t_b = records[1].timestamp;
  jn.nodes = 3;
  jn.cov = 1e-5 * Eigen::MatrixXd::Identity(2 * kNodeDim * 3, 2 * kNodeDim * 3);
  for (size_t i = 0; i + 1 < records.size(); ++i) {
    JointNeighborCovariance j = jn;
    j.t_a = records[i].timestamp;
    j.t_b = records[i + 1].timestamp;
    records[i].joint_with_next = j;
  }
  const EvalReport with_joints = evaluate(records, truth, 0.466, Mat6::Identity(), reports);
  CHECK(with_joints.avg_nees.has_value());
}
