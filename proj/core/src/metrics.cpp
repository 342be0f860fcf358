#include "crest/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "crest/csv.hpp"
#include "crest/errors.hpp"

namespace crest {
namespace metrics {

namespace {

struct TipErrors {
  std::vector<TimestepError> series;
  std::vector<double> per_node_sq_sum;  // position, per node
  long count = 0;
};

TipErrors collect_errors(const std::vector<LockedRecord>& records,
                         const std::vector<TimeSlice>& truth, const Mat6& qc_time,
                         bool with_nees) {
  if (records.empty() || truth.empty()) throw EmptyOverlap("nothing to evaluate");
  const int nodes = static_cast<int>(records.front().mean.size());
  const int tip = nodes - 1;

  TipErrors out;
  out.per_node_sq_sum.assign(static_cast<size_t>(nodes), 0.0);
  for (const TimeSlice& ts : truth) {
    if (ts.timestamp < records.front().timestamp - 1e-12 ||
        ts.timestamp > records.back().timestamp + 1e-12) {
      continue;
    }
    const ContinuousEstimate est =
        query_continuous(records, ts.timestamp, qc_time, with_nees);
    TimestepError e;
    e.timestamp = ts.timestamp;
    for (int j = 0; j < nodes; ++j) {
      const double pe = (est.mean[static_cast<size_t>(j)].pose.translation -
                         ts.nodes[static_cast<size_t>(j)].pose.translation)
                            .norm();
      out.per_node_sq_sum[static_cast<size_t>(j)] += pe * pe;
      if (j == tip) e.pos_err_m = pe;
    }
    e.rot_err_rad = log_so3(est.mean[static_cast<size_t>(tip)].pose.rotation *
                            ts.nodes[static_cast<size_t>(tip)].pose.rotation.transpose())
                        .norm();
    if (with_nees) {
      const Twist pose_err =
          log_se3(ts.nodes[static_cast<size_t>(tip)].pose *
                  est.mean[static_cast<size_t>(tip)].pose.inverse());
      const Mat6 sigma = est.covariance[static_cast<size_t>(tip)].topLeftCorner<6, 6>();
      Eigen::LLT<Mat6> llt(sigma);
      if (llt.info() != Eigen::Success) {
        throw SingularCovariance("interpolated pose covariance not positive definite");
      }
      e.nees = pose_err.dot(llt.solve(pose_err));
    }
    out.series.push_back(e);
    ++out.count;
  }
  if (out.count == 0) throw EmptyOverlap("no ground-truth stamp inside the estimated span");
  return out;
}

}  // namespace

std::pair<double, double> tip_rmse(const std::vector<LockedRecord>& records,
                                   const std::vector<TimeSlice>& truth, double length,
                                   const Mat6& qc_time) {
  const TipErrors errs = collect_errors(records, truth, qc_time, false);
  double pos = 0.0, rot = 0.0;
  for (const TimestepError& e : errs.series) {
    pos += e.pos_err_m * e.pos_err_m;
    rot += e.rot_err_rad * e.rot_err_rad;
  }
  pos = std::sqrt(pos / static_cast<double>(errs.count));
  rot = std::sqrt(rot / static_cast<double>(errs.count));
  return {100.0 * pos / length, rot};
}

double avg_nees(const std::vector<LockedRecord>& records,
                const std::vector<TimeSlice>& truth, const Mat6& qc_time) {
  const TipErrors errs = collect_errors(records, truth, qc_time, true);
  double sum = 0.0;
  for (const TimestepError& e : errs.series) sum += *e.nees;
  return sum / static_cast<double>(errs.count);
}

RuntimeStats runtime_stats(const std::vector<SolveReport>& reports) {
  if (reports.empty()) throw EmptyOverlap("no solve reports");
  std::vector<double> ms;
  ms.reserve(reports.size());
  double sum = 0.0;
  for (const SolveReport& r : reports) {
    ms.push_back(r.wall_ms);
    sum += r.wall_ms;
  }
  std::sort(ms.begin(), ms.end());
  auto rank = [&](double q) {
    const size_t i = static_cast<size_t>(std::ceil(q * static_cast<double>(ms.size()))) - 1;
    return ms[std::min(i, ms.size() - 1)];
  };
  RuntimeStats out;
  out.mean_ms = sum / static_cast<double>(ms.size());
  out.p50_ms = rank(0.50);
  out.p99_ms = rank(0.99);
  out.real_time_capable = out.mean_ms < 1000.0 / 30.0;
  return out;
}

EvalReport evaluate(const std::vector<LockedRecord>& records,
                    const std::vector<TimeSlice>& truth, double length, const Mat6& qc_time,
                    const std::vector<SolveReport>& reports) {
  EvalReport report;
  bool with_nees = std::any_of(records.begin(), records.end(), [](const LockedRecord& r) {
    return r.joint_with_next.has_value();
  });
  TipErrors errs = [&] {
    try {
      return collect_errors(records, truth, qc_time, with_nees);
    } catch (const MissingJointCovariance&) {
      with_nees = false;
      return collect_errors(records, truth, qc_time, false);
    }
  }();

  double pos = 0.0, rot = 0.0, nees = 0.0;
  for (const TimestepError& e : errs.series) {
    pos += e.pos_err_m * e.pos_err_m;
    rot += e.rot_err_rad * e.rot_err_rad;
    if (with_nees) nees += *e.nees;
  }
  report.tip_pos_rmse_pct =
      100.0 * std::sqrt(pos / static_cast<double>(errs.count)) / length;
  report.tip_rot_rmse_rad = std::sqrt(rot / static_cast<double>(errs.count));
  if (with_nees) report.avg_nees = nees / static_cast<double>(errs.count);
  report.series = std::move(errs.series);
  report.per_node_pos_rmse_m.resize(errs.per_node_sq_sum.size());
  for (size_t j = 0; j < errs.per_node_sq_sum.size(); ++j) {
    report.per_node_pos_rmse_m[j] =
        std::sqrt(errs.per_node_sq_sum[j] / static_cast<double>(errs.count));
  }
  if (!reports.empty()) report.runtime = runtime_stats(reports);
  return report;
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  CsvWriter out(path,
                "tip_pos_rmse_pct,tip_rot_rmse_rad,avg_nees,mean_ms,p50_ms,p99_ms,"
                "real_time_capable");
  out.write_row({format_double(report.tip_pos_rmse_pct),
                 format_double(report.tip_rot_rmse_rad),
                 report.avg_nees ? format_double(*report.avg_nees) : std::string(),
                 format_double(report.runtime.mean_ms), format_double(report.runtime.p50_ms),
                 format_double(report.runtime.p99_ms),
                 report.runtime.real_time_capable ? "1" : "0"});
}

std::string report_table(const std::string& trial, const EvalReport& report) {
  char buf[256];
  std::string out;
  out += "Trial                    Tip RMSE              Average   Average\n";
  out += "                         Pos (%)   Rot (rad)   NEES      Runtime (ms)\n";
  const std::string nees =
      report.avg_nees ? (snprintf(buf, sizeof(buf), "%.2f", *report.avg_nees), buf)
                      : std::string("N/A");
  snprintf(buf, sizeof(buf), "%-24s %-9.2f %-11.3f %-9s %.1f\n", trial.c_str(),
           report.tip_pos_rmse_pct, report.tip_rot_rmse_rad, nees.c_str(),
           report.runtime.mean_ms);
  out += buf;
  return out;
}

}  // namespace metrics
}  // namespace crest
