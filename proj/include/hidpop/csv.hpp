#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace hidpop {

// Minimal reader for the unquoted comma-separated files this project
// produces and consumes. Blank lines and lines starting with '#' are skipped.
class CsvReader {
public:
  explicit CsvReader(std::istream& in);

  const std::vector<std::string>& header() const noexcept { return header_; }
  std::optional<std::vector<std::string>> next();
  // 1-based line number of the record last returned.
  std::size_t line() const noexcept { return line_; }

private:
  bool read_record(std::vector<std::string>& out);

  std::istream& in_;
  std::vector<std::string> header_;
  std::size_t line_ = 0;
};

double parse_double(const std::string& field, std::size_t line);
long parse_long(const std::string& field, std::size_t line);

// Six significant digits, the precision of every summary table.
std::string fmt6(double value);

}  // namespace hidpop
