#include "hidpop/panel.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "hidpop/csv.hpp"
#include "hidpop/errors.hpp"

namespace hidpop {

void PanelDataset::validate() const {
  if (y.rows() < 1 || y.cols() < 1) throw ValidationError("panel: empty response matrix");
  if (x.rows() != y.rows() * y.cols()) throw ValidationError("panel: regressor rows must equal N * T");
  if (x.cols() < 1) throw ValidationError("panel: need at least one regressor");
  if (!y.allFinite()) throw ValidationError("panel: non-finite response");
  if (!x.allFinite()) throw ValidationError("panel: non-finite regressor");
}

PanelDataset read_panel_csv(std::istream& in) {
  CsvReader reader(in);
  const auto& header = reader.header();
  if (header.size() < 4 || header[0] != "region" || header[1] != "time" || header[2] != "y")
    throw FormatError("panel CSV header must be `region,time,y,x1,...,xK`", 1);
  const std::size_t k = header.size() - 3;

  struct Row {
    long region, time;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  long max_region = -1, max_time = -1;
  while (auto rec = reader.next()) {
    if (rec->size() != header.size()) throw FormatError("wrong number of fields", reader.line());
    Row r{parse_long(rec->at(0), reader.line()), parse_long(rec->at(1), reader.line()), {}};
    if (r.region < 0 || r.time < 0) throw FormatError("negative region or time index", reader.line());
    for (std::size_t c = 2; c < rec->size(); ++c) r.values.push_back(parse_double(rec->at(c), reader.line()));
    max_region = std::max(max_region, r.region);
    max_time = std::max(max_time, r.time);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError("panel CSV has no data rows");

  const long n = max_region + 1, t = max_time + 1;
  if (static_cast<long>(rows.size()) != n * t)
    throw ValidationError("panel is not balanced: expected " + std::to_string(n * t) + " rows, found " +
                          std::to_string(rows.size()));
  PanelDataset data;
  data.y.setConstant(n, t, std::numeric_limits<double>::quiet_NaN());
  data.x.resize(n * t, static_cast<Eigen::Index>(k));
  std::vector<char> seen(static_cast<std::size_t>(n * t), 0);
  for (const auto& r : rows) {
    auto cell = static_cast<std::size_t>(r.region * t + r.time);
    if (seen[cell]) throw ValidationError("duplicate cell region=" + std::to_string(r.region) + " time=" + std::to_string(r.time));
    seen[cell] = 1;
    data.y(r.region, r.time) = r.values[0];
    for (std::size_t c = 0; c < k; ++c) data.x(static_cast<Eigen::Index>(cell), static_cast<Eigen::Index>(c)) = r.values[c + 1];
  }
  data.validate();
  return data;
}

PanelDataset read_panel_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open panel file " + path.string());
  return read_panel_csv(in);
}

void write_panel_csv(std::ostream& out, const PanelDataset& data) {
  out << "region,time,y";
  for (int c = 0; c < data.k_regressors(); ++c) out << ",x" << (c + 1);
  out << '\n';
  out << std::setprecision(17);
  const int t_len = data.n_periods();
  for (int i = 0; i < data.n_regions(); ++i)
    for (int t = 0; t < t_len; ++t) {
      out << i << ',' << t << ',' << data.y(i, t);
      for (int c = 0; c < data.k_regressors(); ++c) out << ',' << data.x(i * t_len + t, c);
      out << '\n';
    }
}

}  // namespace hidpop
