// crest: simulate / estimate / evaluate / sweep driver for the sliding-window
// continuum robot estimator. See README.md for the config key reference.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "crest/config.hpp"
#include "crest/csv.hpp"
#include "crest/errors.hpp"
#include "crest/metrics.hpp"
#include "crest/sim.hpp"
#include "crest/window.hpp"

namespace {

using namespace crest;

std::string estimate_csv_header() {
  std::string h = state_csv_header();
  for (int i = 0; i < 171; ++i) h += ",c" + std::to_string(i);
  return h;
}

std::string joints_csv_header() {
  std::string h = "t_a,t_b,node_index";
  for (int i = 0; i < 300; ++i) h += ",c" + std::to_string(i);
  return h;
}

void write_estimate_rows(CsvWriter& out, double timestamp, const StateConfig& cfg,
                         const std::vector<NodeState>& mean, const Eigen::MatrixXd& cov) {
  std::vector<std::string> fields;
  for (int j = 0; j < static_cast<int>(mean.size()); ++j) {
    fields.clear();
    fields.push_back(format_double(timestamp));
    fields.push_back(format_double(cfg.arc_length(j)));
    const Mat4 m = mean[static_cast<size_t>(j)].pose.matrix();
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) fields.push_back(format_double(m(r, c)));
    for (int i = 0; i < 6; ++i)
      fields.push_back(format_double(mean[static_cast<size_t>(j)].velocity[i]));
    for (int i = 0; i < 6; ++i)
      fields.push_back(format_double(mean[static_cast<size_t>(j)].strain[i]));
    const Mat18 block = cov.block<kNodeDim, kNodeDim>(kNodeDim * j, kNodeDim * j);
    for (int r = 0; r < kNodeDim; ++r)
      for (int c = r; c < kNodeDim; ++c) fields.push_back(format_double(block(r, c)));
    out.write_row(fields);
  }
}

void write_records(const RunConfig& cfg, const std::vector<LockedRecord>& records) {
  const StateConfig scfg = cfg.state_config();
  CsvWriter rec_out(cfg.output_file("records"), estimate_csv_header());
  for (const LockedRecord& r : records) {
    write_estimate_rows(rec_out, r.timestamp, scfg, r.mean, r.covariance);
  }

  CsvWriter joint_out(cfg.output_file("joints"), joints_csv_header());
  std::vector<std::string> fields;
  for (const LockedRecord& r : records) {
    if (!r.joint_with_next.has_value()) continue;
    const JointNeighborCovariance& jn = *r.joint_with_next;
    for (int j = 0; j < jn.nodes; ++j) {
      const Mat24 block = jn.joint_block(j);
      fields.clear();
      fields.push_back(format_double(jn.t_a));
      fields.push_back(format_double(jn.t_b));
      fields.push_back(std::to_string(j));
      for (int r2 = 0; r2 < 24; ++r2)
        for (int c = r2; c < 24; ++c) fields.push_back(format_double(block(r2, c)));
      joint_out.write_row(fields);
    }
  }
}

std::vector<LockedRecord> read_records(const RunConfig& cfg) {
  std::vector<LockedRecord> records;
  const int nodes = cfg.nodes;
  for (const auto& [lineno, row] : read_csv_rows(cfg.output_file("records"),
                                                 estimate_csv_header())) {
    const std::vector<std::string_view> f = split_csv_line(row);
    if (static_cast<int>(f.size()) != 30 + 171) throw SchemaError("expected 201 fields", lineno);
    auto field = [&, line = lineno](size_t i) {
      auto v = parse_double_field(f[i], line);
      if (!v.has_value()) throw SchemaError("missing required field", line);
      return *v;
    };
    const double t = field(0);
    if (records.empty() || records.back().timestamp != t) {
      LockedRecord r;
      r.timestamp = t;
      r.covariance = Eigen::MatrixXd::Zero(kNodeDim * nodes, kNodeDim * nodes);
      records.push_back(std::move(r));
    }
    LockedRecord& rec = records.back();
    const int j = static_cast<int>(rec.mean.size());
    NodeState n;
    Mat4 p;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) p(r, c) = field(2 + static_cast<size_t>(4 * r + c));
    n.pose = Pose::from_matrix(p);
    for (int i = 0; i < 6; ++i) n.velocity[i] = field(18 + static_cast<size_t>(i));
    for (int i = 0; i < 6; ++i) n.strain[i] = field(24 + static_cast<size_t>(i));
    rec.mean.push_back(std::move(n));
    size_t k = 30;
    for (int r = 0; r < kNodeDim; ++r)
      for (int c = r; c < kNodeDim; ++c) {
        const double v = field(k++);
        rec.covariance(kNodeDim * j + r, kNodeDim * j + c) = v;
        rec.covariance(kNodeDim * j + c, kNodeDim * j + r) = v;
      }
  }

  // Joint neighbor covariances, keyed back onto records by t_a.
  const std::string joints_path = cfg.output_file("joints");
  if (std::filesystem::exists(joints_path)) {
    for (const auto& [lineno, row] : read_csv_rows(joints_path, joints_csv_header())) {
      const std::vector<std::string_view> f = split_csv_line(row);
      if (f.size() != 303) throw SchemaError("expected 303 fields", lineno);
      auto field = [&, line = lineno](size_t i) {
        auto v = parse_double_field(f[i], line);
        if (!v.has_value()) throw SchemaError("missing required field", line);
        return *v;
      };
      const double t_a = field(0);
      const double t_b = field(1);
      const int j = static_cast<int>(field(2));
      auto it = std::find_if(records.begin(), records.end(), [&](const LockedRecord& r) {
        return r.timestamp == t_a;
      });
      if (it == records.end()) throw SchemaError("joint row has no matching record", lineno);
      if (!it->joint_with_next.has_value()) {
        JointNeighborCovariance jn;
        jn.t_a = t_a;
        jn.t_b = t_b;
        jn.nodes = nodes;
        jn.cov = Eigen::MatrixXd::Zero(2 * kNodeDim * nodes, 2 * kNodeDim * nodes);
        it->joint_with_next = std::move(jn);
      }
      Eigen::MatrixXd& cov = it->joint_with_next->cov;
      Mat24 block;
      size_t k = 3;
      for (int r = 0; r < 24; ++r)
        for (int c = r; c < 24; ++c) {
          block(r, c) = field(k++);
          block(c, r) = block(r, c);
        }
      const int oa = kNodeDim * j;
      const int ob = kNodeDim * nodes + kNodeDim * j;
      cov.block<12, 12>(oa, oa) = block.topLeftCorner<12, 12>();
      cov.block<12, 12>(oa, ob) = block.topRightCorner<12, 12>();
      cov.block<12, 12>(ob, oa) = block.bottomLeftCorner<12, 12>();
      cov.block<12, 12>(ob, ob) = block.bottomRightCorner<12, 12>();
    }
  }
  return records;
}

int cmd_simulate(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  const sim::GroundTruth truth = sim::generate(cfg.trajectory());
  const std::vector<Measurement> ms = sim::synthesize(truth, cfg.sensors());
  write_state_csv(cfg.truth_file(), truth.slices, truth.config.grid());
  sim::write_measurement_csv(cfg.measurements_file(), ms);
  std::cout << "simulate: profile=" << cfg.profile << " seed=" << cfg.seed
            << " truth_slices=" << truth.slices.size() << " measurements=" << ms.size()
            << "\n"
            << "  truth -> " << cfg.truth_file() << "\n"
            << "  measurements -> " << cfg.measurements_file() << "\n";
  return 0;
}

int cmd_estimate(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  std::vector<Measurement> ms = sim::read_measurement_csv(cfg.measurements_file());
  if (ms.empty()) {
    std::cerr << "warning: no measurements, producing prior-only estimates\n";
  }
  // Online arrival order regardless of file order.
  std::stable_sort(ms.begin(), ms.end(), [](const Measurement& a, const Measurement& b) {
    return a.timestamp < b.timestamp;
  });

  const StateConfig scfg = cfg.state_config();
  auto model = std::make_shared<ContinuumModel>(scfg, cfg.model_config(), cfg.spectra());
  SlidingWindow window(scfg, cfg.swf_config(), model);
  window.bootstrap(0.0, straight_rod_slice(0.0, scfg, cfg.model_config().base_pose));

  CsvWriter est_out(cfg.output_file("estimates"), estimate_csv_header());
  CsvWriter rep_out(cfg.output_file("report"), "window_index,iterations,cost,wall_ms");

  const double dt = scfg.dt;
  const long steps = static_cast<long>(std::floor(cfg.duration / dt + 1e-9));
  size_t cursor = 0;
  long dropped = 0;
  while (cursor < ms.size() && ms[cursor].timestamp <= 0.0) {
    ++cursor;
    ++dropped;
  }
  std::vector<SolveReport> reports;
  std::vector<Measurement> in_step;
  for (long k = 1; k <= steps; ++k) {
    const double t = dt * static_cast<double>(k);
    in_step.clear();
    while (cursor < ms.size() && ms[cursor].timestamp <= t + 1e-12) {
      in_step.push_back(ms[cursor]);
      ++cursor;
    }
    const Estimate est = window.step(t, in_step);
    write_estimate_rows(est_out, est.timestamp, scfg, est.mean, est.covariance);
    rep_out.write_row({std::to_string(k), std::to_string(est.report.iterations),
                       format_double(est.report.final_cost),
                       format_double(est.report.wall_ms)});
    reports.push_back(est.report);
  }
  dropped += static_cast<long>(ms.size() - cursor);
  if (dropped > 0) {
    std::cerr << "warning: " << dropped
              << " measurements outside (0, duration] were ignored\n";
  }

  window.finalize();
  write_records(cfg, window.locked());

  double mean_ms = 0.0;
  for (const SolveReport& r : reports) mean_ms += r.wall_ms;
  if (!reports.empty()) mean_ms /= static_cast<double>(reports.size());
  std::cout << "estimate: profile=" << cfg.profile << " window=" << cfg.window_seconds
            << "s slices=" << cfg.swf_config().window_slices() << " steps=" << steps
            << " mean_window_ms=" << mean_ms << "\n"
            << "  covariance discontinuity (max): "
            << covariance_discontinuity(window.locked(), cfg.spectra().qc_time) << "\n"
            << "  estimates -> " << cfg.output_file("estimates") << "\n"
            << "  records   -> " << cfg.output_file("records") << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  const std::vector<TimeSlice> truth = read_state_csv(cfg.truth_file());
  const std::vector<LockedRecord> records = read_records(cfg);

  std::vector<SolveReport> reports;
  for (const auto& [lineno, row] :
       read_csv_rows(cfg.output_file("report"), "window_index,iterations,cost,wall_ms")) {
    const std::vector<std::string_view> f = split_csv_line(row);
    if (f.size() != 4) throw SchemaError("expected 4 fields", lineno);
    SolveReport r;
    r.iterations = static_cast<int>(*parse_double_field(f[1], lineno));
    r.final_cost = *parse_double_field(f[2], lineno);
    r.wall_ms = *parse_double_field(f[3], lineno);
    reports.push_back(r);
  }

  const metrics::EvalReport report =
      metrics::evaluate(records, truth, cfg.length, cfg.spectra().qc_time, reports);
  metrics::write_report_csv(cfg.output_file("eval"), report);

  char trial[128];
  snprintf(trial, sizeof(trial), "%s SWF(%gs)", cfg.profile.c_str(), cfg.window_seconds);
  std::cout << metrics::report_table(trial, report);
  std::cout << "  eval -> " << cfg.output_file("eval") << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& base) {
  std::filesystem::create_directories(base.out_dir);
  if (base.sweep_windows.size() < 2) {
    throw ConfigError("sweep needs at least two window values");
  }
  CsvWriter out(base.out_dir + "/sweep.csv",
                "trajectory,window_s,pos_rmse_pct,rot_rmse,nees,mean_ms,failure");
  for (const std::string& profile : base.sweep_profiles) {
    RunConfig sim_cfg = base;
    sim_cfg.profile = profile;
    cmd_simulate(sim_cfg);
    for (double w : base.sweep_windows) {
      RunConfig run = sim_cfg;
      run.window_seconds = w;
      char sub[64];
      snprintf(sub, sizeof(sub), "%s/w%g", base.out_dir.c_str(), w);
      run.out_dir = sub;
      run.measurements_path = sim_cfg.measurements_file();
      run.truth_path = sim_cfg.truth_file();
      std::string failure;
      metrics::EvalReport report;
      try {
        cmd_estimate(run);
        const std::vector<TimeSlice> truth = read_state_csv(run.truth_file());
        const std::vector<LockedRecord> records = read_records(run);
        std::vector<SolveReport> reports;
        for (const auto& [lineno, row] : read_csv_rows(
                 run.output_file("report"), "window_index,iterations,cost,wall_ms")) {
          const std::vector<std::string_view> f = split_csv_line(row);
          SolveReport r;
          r.wall_ms = *parse_double_field(f[3], lineno);
          reports.push_back(r);
        }
        report = metrics::evaluate(records, truth, run.length, run.spectra().qc_time,
                                   reports);
      } catch (const EstimatorError& e) {
        failure = e.what();
        for (char& c : failure) {
          if (c == ',' || c == '\n') c = ';';
        }
      }
      out.write_row({profile, format_double(w),
                     failure.empty() ? format_double(report.tip_pos_rmse_pct) : "",
                     failure.empty() ? format_double(report.tip_rot_rmse_rad) : "",
                     failure.empty() && report.avg_nees ? format_double(*report.avg_nees)
                                                        : "",
                     failure.empty() ? format_double(report.runtime.mean_ms) : "",
                     failure});
    }
  }
  std::cout << "sweep -> " << base.out_dir << "/sweep.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuum robot sliding-window estimation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::optional<double> window_seconds;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> profile;

  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--window-seconds", window_seconds, "estimation window length");
  app.add_option("--seed", seed, "RNG seed for all randomness");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--profile", profile, "trajectory profile name");

  auto* sim_cmd = app.add_subcommand("simulate", "generate ground truth and measurements");
  auto* est_cmd = app.add_subcommand("estimate", "run the sliding-window estimator");
  auto* eval_cmd = app.add_subcommand("evaluate", "compute evaluation metrics");
  auto* sweep_cmd = app.add_subcommand("sweep", "window-size sweep over profiles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config_file(config_path);
    if (window_seconds) cfg.window_seconds = *window_seconds;
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.out_dir = *out_dir;
    if (profile) cfg.profile = *profile;

    if (sim_cmd->parsed()) return cmd_simulate(cfg);
    if (est_cmd->parsed()) return cmd_estimate(cfg);
    if (eval_cmd->parsed()) return cmd_evaluate(cfg);
    if (sweep_cmd->parsed()) return cmd_sweep(cfg);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
