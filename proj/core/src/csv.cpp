#include "crest/csv.hpp"

#include <charconv>
#include <system_error>

#include "crest/errors.hpp"

namespace crest {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double_field(std::string_view field, long line) {
  if (field.empty()) return std::nullopt;
  double value = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw SchemaError("malformed number '" + std::string(field) + "'", line);
  }
  return value;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& header) : path_(path) {
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot open '" + path + "' for writing");
  out_ << header << "\n";
}

void CsvWriter::write_row(const std::vector<std::string>& fields) {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << fields[i];
  }
  out_ << "\n";
  if (!out_) throw IoError("write failed on '" + path_ + "'");
}

std::vector<std::pair<long, std::string>> read_csv_rows(const std::string& path,
                                                        const std::string& expected_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::pair<long, std::string>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != expected_header) {
        throw SchemaError("unexpected header, want '" + expected_header + "'", 1);
      }
      continue;
    }
    if (line.empty()) continue;
    rows.emplace_back(lineno, std::move(line));
    line.clear();
  }
  return rows;
}

}  // namespace crest
