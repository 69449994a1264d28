#include "hidpop/csv.hpp"

#include <charconv>
#include <cstdio>

#include "hidpop/errors.hpp"

namespace hidpop {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

CsvReader::CsvReader(std::istream& in) : in_(in) {
  if (!read_record(header_)) throw FormatError("CSV file is empty");
}

bool CsvReader::read_record(std::vector<std::string>& out) {
  std::string raw;
  while (std::getline(in_, raw)) {
    ++line_;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    out.clear();
    std::size_t start = 0;
    for (;;) {
      auto comma = line.find(',', start);
      out.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return true;
  }
  return false;
}

std::optional<std::vector<std::string>> CsvReader::next() {
  std::vector<std::string> rec;
  if (!read_record(rec)) return std::nullopt;
  return rec;
}

double parse_double(const std::string& field, std::size_t line) {
  try {
    std::size_t pos = 0;
    double v = std::stod(field, &pos);
    if (pos == field.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("not a number: '" + field + "'", line);
}

long parse_long(const std::string& field, std::size_t line) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw FormatError("not an integer: '" + field + "'", line);
  return v;
}

std::string fmt6(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

}  // namespace hidpop
