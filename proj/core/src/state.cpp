#include "crest/state.hpp"

#include "crest/csv.hpp"
#include "crest/errors.hpp"

namespace crest {

int perturbation_offset(const GridIndex& idx, long first_time_index, long slice_count,
                        int nodes_per_slice) {
  const long local = idx.time_index - first_time_index;
  if (local < 0 || local >= slice_count || idx.space_index < 0 ||
      idx.space_index >= nodes_per_slice) {
    throw IndexOutOfWindow("grid index (" + std::to_string(idx.time_index) + ", " +
                           std::to_string(idx.space_index) + ") outside window");
  }
  return kNodeDim * (nodes_per_slice * static_cast<int>(local) + idx.space_index);
}

NodeState retract(const NodeState& x, const Vec18& delta) {
  NodeState out;
  out.pose = exp_se3(delta.head<6>()) * x.pose;
  out.velocity = x.velocity + delta.segment<6>(6);
  out.strain = x.strain + delta.tail<6>();
  return out;
}

std::string state_csv_header() {
  std::string h = "t,s";
  for (int i = 0; i < 16; ++i) h += ",p" + std::to_string(i);
  for (int i = 0; i < 6; ++i) h += ",v" + std::to_string(i);
  for (int i = 0; i < 6; ++i) h += ",e" + std::to_string(i);
  return h;
}

std::vector<TimeSlice> read_state_csv(const std::string& path) {
  std::vector<TimeSlice> out;
  for (const auto& [lineno, row] : read_csv_rows(path, state_csv_header())) {
    const std::vector<std::string_view> f = split_csv_line(row);
    if (f.size() != 30) throw SchemaError("expected 30 fields", lineno);
    auto field = [&, line = lineno](size_t i) {
      auto v = parse_double_field(f[i], line);
      if (!v.has_value()) throw SchemaError("missing required field", line);
      return *v;
    };
    const double t = field(0);
    NodeState n;
    Mat4 p;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) p(r, c) = field(2 + static_cast<size_t>(4 * r + c));
    n.pose = Pose::from_matrix(p);
    for (int i = 0; i < 6; ++i) n.velocity[i] = field(18 + static_cast<size_t>(i));
    for (int i = 0; i < 6; ++i) n.strain[i] = field(24 + static_cast<size_t>(i));
    if (out.empty() || out.back().timestamp != t) {
      out.push_back(TimeSlice{t, {}});
    }
    out.back().nodes.push_back(std::move(n));
  }
  return out;
}

void write_state_csv(const std::string& path, const std::vector<TimeSlice>& slices,
                     const StateConfig& config) {
  CsvWriter out(path, state_csv_header());
  std::vector<std::string> fields;
  for (const TimeSlice& slice : slices) {
    for (int j = 0; j < static_cast<int>(slice.nodes.size()); ++j) {
      const NodeState& n = slice.nodes[j];
      fields.clear();
      fields.push_back(format_double(slice.timestamp));
      fields.push_back(format_double(config.arc_length(j)));
      const Mat4 m = n.pose.matrix();
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) fields.push_back(format_double(m(r, c)));
      for (int i = 0; i < 6; ++i) fields.push_back(format_double(n.velocity[i]));
      for (int i = 0; i < 6; ++i) fields.push_back(format_double(n.strain[i]));
      out.write_row(fields);
    }
  }
}

}  // namespace crest
