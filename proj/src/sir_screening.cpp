#include "hidpop/sir_screening.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "hidpop/csv.hpp"
#include "hidpop/errors.hpp"

namespace hidpop {

void CountPanel::validate() const {
  if (s.rows() < 1 || s.cols() < 1) throw ValidationError("counts: empty panel");
  if (s.rows() != n.rows() || s.cols() != n.cols()) throw ValidationError("counts: count and population shapes differ");
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index t = 0; t < s.cols(); ++t) {
      double c = s(i, t);
      if (!(c >= 0.0) || c != std::floor(c) || !std::isfinite(c))
        throw ValidationError("counts: region " + std::to_string(i) + " time " + std::to_string(t) +
                              " is not a nonnegative integer");
      if (!(n(i, t) > 0.0) || !std::isfinite(n(i, t)))
        throw ValidationError("counts: region " + std::to_string(i) + " time " + std::to_string(t) +
                              " has a nonpositive population");
    }
}

SirTable compute_sir(const CountPanel& panel) {
  panel.validate();
  const auto n_regions = panel.s.rows(), t_len = panel.s.cols();
  SirTable out;
  out.expected.resize(n_regions, t_len);
  out.sir.resize(n_regions, t_len);
  out.exceedance.setConstant(n_regions, t_len, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const double total_s = panel.s.col(t).sum(), total_n = panel.n.col(t).sum();
    if (!(total_s > 0.0)) throw ValidationError("counts: period " + std::to_string(t) + " has no events");
    for (Eigen::Index i = 0; i < n_regions; ++i) {
      double e = panel.n(i, t) * total_s / total_n;
      out.expected(i, t) = e;
      if (e > 0.0) {
        out.sir(i, t) = panel.s(i, t) / e;
      } else {
        out.sir(i, t) = std::numeric_limits<double>::quiet_NaN();
        ++out.undefined_cells;
      }
    }
  }
  return out;
}

double exceedance_probability(double s, double expected, double nu, double alpha) {
  if (!(s >= 0.0) || !(expected > 0.0)) throw std::invalid_argument("exceedance_probability: need s >= 0 and E > 0");
  if (!(nu > 0.0) || !(alpha >= 0.0)) throw std::invalid_argument("exceedance_probability: bad prior");
  // P(X > 1) for X ~ Gamma(shape, rate) is Q(shape, rate * 1).
  return boost::math::gamma_q(s + nu, expected + alpha);
}

void compute_exceedance(SirTable& table, const CountPanel& panel) {
  if (panel.s.rows() != table.expected.rows() || panel.s.cols() != table.expected.cols())
    throw std::invalid_argument("compute_exceedance: shape mismatch");
  for (Eigen::Index i = 0; i < panel.s.rows(); ++i)
    for (Eigen::Index t = 0; t < panel.s.cols(); ++t)
      table.exceedance(i, t) = table.expected(i, t) > 0.0
                                   ? exceedance_probability(panel.s(i, t), table.expected(i, t), table.prior_nu,
                                                            table.prior_alpha)
                                   : std::numeric_limits<double>::quiet_NaN();
}

std::string tier_label(double exceedance, const std::vector<double>& thresholds) {
  std::vector<double> sorted = thresholds;
  std::sort(sorted.begin(), sorted.end());
  std::string label = "none";
  for (double th : sorted) {
    if (!(exceedance >= th)) break;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", th * 100.0);
    label = buf;
  }
  return label;
}

std::vector<std::vector<std::string>> flag_hotspots(const SirTable& table, const std::vector<double>& thresholds) {
  for (double th : thresholds)
    if (!(th > 0.0 && th < 1.0)) throw std::invalid_argument("flag_hotspots: thresholds must lie in (0, 1)");
  std::vector<std::vector<std::string>> tiers(static_cast<std::size_t>(table.exceedance.rows()));
  for (Eigen::Index i = 0; i < table.exceedance.rows(); ++i)
    for (Eigen::Index t = 0; t < table.exceedance.cols(); ++t)
      tiers[static_cast<std::size_t>(i)].push_back(tier_label(table.exceedance(i, t), thresholds));
  return tiers;
}

CountPanel read_count_csv(std::istream& in) {
  CsvReader reader(in);
  const std::vector<std::string> expected{"region", "time", "count", "population"};
  if (reader.header() != expected) throw FormatError("counts CSV header must be `region,time,count,population`", 1);
  struct Row {
    long i, t;
    double s, n;
  };
  std::vector<Row> rows;
  long n_regions = 0, t_len = 0;
  while (auto rec = reader.next()) {
    auto ln = reader.line();
    if (rec->size() != expected.size()) throw FormatError("wrong number of fields", ln);
    Row r{parse_long((*rec)[0], ln), parse_long((*rec)[1], ln), parse_double((*rec)[2], ln), parse_double((*rec)[3], ln)};
    if (r.i < 0 || r.t < 0) throw FormatError("negative index", ln);
    n_regions = std::max(n_regions, r.i + 1);
    t_len = std::max(t_len, r.t + 1);
    rows.push_back(r);
  }
  if (rows.empty()) throw ValidationError("counts CSV has no data rows");
  if (static_cast<long>(rows.size()) != n_regions * t_len) throw ValidationError("counts panel is not balanced");
  CountPanel panel;
  panel.s.setConstant(n_regions, t_len, -1.0);
  panel.n.setConstant(n_regions, t_len, std::numeric_limits<double>::quiet_NaN());
  for (const auto& r : rows) {
    if (std::isfinite(panel.n(r.i, r.t)))
      throw ValidationError("duplicate cell region=" + std::to_string(r.i) + " time=" + std::to_string(r.t));
    panel.s(r.i, r.t) = r.s;
    panel.n(r.i, r.t) = r.n;
  }
  panel.validate();
  return panel;
}

CountPanel read_count_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open counts file " + path.string());
  return read_count_csv(in);
}

void write_sir_csv(std::ostream& out, const SirTable& table, const std::vector<std::vector<std::string>>& tiers) {
  out << "region,time,sir,expected,exceedance,tier\n";
  for (Eigen::Index i = 0; i < table.sir.rows(); ++i)
    for (Eigen::Index t = 0; t < table.sir.cols(); ++t)
      out << i << ',' << t << ',' << fmt6(table.sir(i, t)) << ',' << fmt6(table.expected(i, t)) << ','
          << fmt6(table.exceedance(i, t)) << ',' << tiers[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)]
          << '\n';
}

}  // namespace hidpop
