#pragma once

// Evaluation protocol: length-normalized tip RMSE, rotation RMSE, average
// NEES on the 6-DoF pose block, and per-window runtime statistics. All
// pose-error metrics are evaluated against ground-truth timestamps through
// the continuous-time query of the locked history.

#include <optional>
#include <string>
#include <vector>

#include "crest/window.hpp"

namespace crest {
namespace metrics {

struct RuntimeStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  bool real_time_capable = false;  // mean below the 33.3 ms slice period
};

struct TimestepError {
  double timestamp = 0.0;
  double pos_err_m = 0.0;
  double rot_err_rad = 0.0;
  std::optional<double> nees;
};

struct EvalReport {
  double tip_pos_rmse_pct = 0.0;  // percent of robot length
  double tip_rot_rmse_rad = 0.0;
  std::optional<double> avg_nees;  // empty = N/A (filter mode)
  RuntimeStats runtime;
  std::vector<double> per_node_pos_rmse_m;
  std::vector<TimestepError> series;
};

/// Tip RMSE over all ground-truth stamps inside the estimated span: position
/// error norm divided by L (percent), rotation error as the geodesic angle.
/// Throws EmptyOverlap when no truth stamp falls inside the records.
std::pair<double, double> tip_rmse(const std::vector<LockedRecord>& records,
                                   const std::vector<TimeSlice>& truth, double length,
                                   const Mat6& qc_time);

/// Average NEES of the tip pose: e^T Sigma_pose^{-1} e with e the 6-DoF local
/// pose error at interpolated truth stamps; optimal value is 6.
double avg_nees(const std::vector<LockedRecord>& records,
                const std::vector<TimeSlice>& truth, const Mat6& qc_time);

RuntimeStats runtime_stats(const std::vector<SolveReport>& reports);

/// Full evaluation; NEES falls back to N/A when the records carry no joint
/// covariances (filter mode).
EvalReport evaluate(const std::vector<LockedRecord>& records,
                    const std::vector<TimeSlice>& truth, double length, const Mat6& qc_time,
                    const std::vector<SolveReport>& reports);

void write_report_csv(const std::string& path, const EvalReport& report);

/// Table-style text block mirroring the summary layout of the evaluation.
std::string report_table(const std::string& trial, const EvalReport& report);

}  // namespace metrics
}  // namespace crest
