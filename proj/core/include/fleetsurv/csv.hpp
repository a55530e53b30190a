#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace fleetsurv::csv {

/// Splits one comma-separated line. No quoting: the file schemas handled
/// here never carry embedded commas.
std::vector<std::string_view> split(std::string_view line);

double parse_double(std::string_view field);  // throws DataError
long long parse_int(std::string_view field);  // throws DataError

/// Line-oriented reader that tracks 1-based line numbers and strips a
/// trailing '\r'.
class LineReader {
 public:
  explicit LineReader(const std::string& path);

  bool next(std::string& line);
  [[nodiscard]] std::size_t line_number() const { return line_number_; }
  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_number_ = 0;
};

/// Reads the header row and throws DataError unless it matches `expected`
/// exactly.
void expect_header(LineReader& reader, std::string_view expected);

/// Shortest round-trip formatting used for every emitted numeric field.
std::string format_double(double value);

}  // namespace fleetsurv::csv
