#pragma once

// Minimal CSV helpers shared by the export/import paths. Doubles are written
// with std::to_chars (shortest round-trip form) so identical runs produce
// byte-identical files.

#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crest {

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

/// Parses a double field; empty fields yield nullopt. Throws SchemaError on
/// malformed numbers, tagging the given line number.
std::optional<double> parse_double_field(std::string_view field, long line);

/// Splits one CSV line on commas, keeping empty fields.
std::vector<std::string_view> split_csv_line(std::string_view line);

/// Line-oriented CSV writer with a fixed header.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header);

  void write_row(const std::vector<std::string>& fields);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

/// Reads an entire CSV file; returns data rows (header skipped) along with
/// their 1-based line numbers. Throws IoError when the file cannot be read
/// or SchemaError when the header does not match.
std::vector<std::pair<long, std::string>> read_csv_rows(const std::string& path,
                                                        const std::string& expected_header);

}  // namespace crest
