#include "hidpop/posterior_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hidpop/errors.hpp"

namespace hidpop {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

std::vector<double> row_vector(const Eigen::MatrixXd& m, Eigen::Index r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = m(r, c);
  return out;
}

void check_cell(const PosteriorDraws& draws, const Eigen::MatrixXd& y_level, int region, int time) {
  if (y_level.rows() != draws.n_regions || y_level.cols() != draws.n_periods)
    throw std::invalid_argument("observed outcome shape does not match the draws");
  if (region < 0 || region >= draws.n_regions || time < 0 || time >= draws.n_periods)
    throw std::out_of_range("cell index out of range");
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Interval hdi(std::span<const double> draws, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("hdi: level must be in (0, 1)");
  if (draws.size() < 100) throw ValidationError("hdi: need at least 100 draws");
  std::vector<double> sorted(draws.begin(), draws.end());
  for (double d : sorted)
    if (!std::isfinite(d)) throw ValidationError("hdi: non-finite draw");
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  auto gap = static_cast<std::size_t>(std::ceil(level * double(n) - 1e-9));
  gap = std::min(gap, n - 1);
  std::size_t best = 0;
  double width = std::numeric_limits<double>::infinity();
  for (std::size_t lo = 0; lo + gap < n; ++lo) {
    double w = sorted[lo + gap] - sorted[lo];
    if (w < width) {
      width = w;
      best = lo;
    }
  }
  return {sorted[best], sorted[best + gap]};
}

HiddenPopulationInterval hidden_population_interval(const PosteriorDraws& draws, const Eigen::MatrixXd& y_level,
                                                    int region, int time, double level) {
  check_cell(draws, y_level, region, time);
  HiddenPopulationInterval out{region, time, 0.0, 0.0, 0.0, level};
  const double y = y_level(region, time);
  if (y == 0.0) return out;
  const auto row = static_cast<Eigen::Index>(region) * draws.n_periods + time;
  std::vector<double> p(static_cast<std::size_t>(draws.n_draws()));
  for (int s = 0; s < draws.n_draws(); ++s)
    p[static_cast<std::size_t>(s)] = y * std::exp(draws.eta_plus(region, s) + draws.u_plus(row, s));
  out.point_estimate = mean_of(p);
  auto iv = hdi(p, level);
  out.hdi_lower = iv.lower;
  out.hdi_upper = iv.upper;
  return out;
}

std::vector<HiddenPopulationInterval> hidden_population_intervals(const PosteriorDraws& draws,
                                                                  const Eigen::MatrixXd& y_level, double level) {
  std::vector<HiddenPopulationInterval> out;
  out.reserve(static_cast<std::size_t>(draws.n_regions) * draws.n_periods);
  for (int i = 0; i < draws.n_regions; ++i)
    for (int t = 0; t < draws.n_periods; ++t) out.push_back(hidden_population_interval(draws, y_level, i, t, level));
  return out;
}

CoverageReport coverage_report(const std::vector<HiddenPopulationInterval>& intervals, const Eigen::MatrixXd& true_P,
                               double level, int n_beta_draws, RandomStream& rng) {
  if (intervals.empty()) throw std::invalid_argument("coverage_report: no intervals");
  if (n_beta_draws < 100) throw std::invalid_argument("coverage_report: need at least 100 Beta draws");
  CoverageReport rep;
  rep.nominal_level = level;
  rep.cells = static_cast<int>(intervals.size());
  for (const auto& iv : intervals) {
    if (iv.region < 0 || iv.region >= true_P.rows() || iv.time < 0 || iv.time >= true_P.cols())
      throw std::out_of_range("coverage_report: interval outside the truth table");
    double p = true_P(iv.region, iv.time);
    if (iv.hdi_lower <= p && p <= iv.hdi_upper) ++rep.hits;
  }
  rep.a = 1.0 + rep.hits;
  rep.b = 1.0 + rep.cells - rep.hits;
  std::vector<double> theta(static_cast<std::size_t>(n_beta_draws));
  for (auto& th : theta) th = rng.beta(rep.a, rep.b);
  rep.posterior_mean_coverage = mean_of(theta);
  rep.coverage_hdi = hdi(theta, 0.95);
  return rep;
}

MapeSummary mape_summary(const PosteriorDraws& draws, const Eigen::MatrixXd& y_level, const Eigen::MatrixXd& true_P,
                         MapeMode mode) {
  const int n = draws.n_regions, t_len = draws.n_periods, s_count = draws.n_draws();
  if (true_P.rows() != n || true_P.cols() != t_len) throw std::invalid_argument("mape: truth shape mismatch");
  if (y_level.rows() != n || y_level.cols() != t_len) throw std::invalid_argument("mape: outcome shape mismatch");
  MapeSummary out;
  out.per_cell.setConstant(n, t_len, kNaN);
  std::vector<double> values;
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < t_len; ++t) {
      const double p_true = true_P(i, t);
      if (p_true == 0.0) {
        ++out.excluded;
        continue;
      }
      const auto row = static_cast<Eigen::Index>(i) * t_len + t;
      double acc = 0.0, mean_p = 0.0;
      for (int s = 0; s < s_count; ++s) {
        double p = y_level(i, t) * std::exp(draws.eta_plus(i, s) + draws.u_plus(row, s));
        mean_p += p;
        acc += std::abs(p_true - p);
      }
      mean_p /= s_count;
      double e = mode == MapeMode::PointEstimate ? std::abs(p_true - mean_p) / p_true : acc / s_count / p_true;
      out.per_cell(i, t) = e;
      values.push_back(e);
    }
  }
  if (values.empty()) throw ValidationError("mape: every true P is zero");
  out.average = mean_of(values);
  out.median = median(values);
  out.hdi = values.size() >= 100 ? hdi(values, 0.95) : Interval{kNaN, kNaN};
  return out;
}

double rho_hat(const Eigen::MatrixXd& draws, const Eigen::VectorXd& truth) {
  if (draws.rows() != truth.size() || draws.cols() == 0) throw std::invalid_argument("rho_hat: shape mismatch");
  const Eigen::VectorXd tc = truth.array() - truth.mean();
  const double tn = tc.norm();
  if (!(tn > 0.0)) throw ValidationError("rho_hat: truth has zero variance");
  double acc = 0.0;
  for (Eigen::Index s = 0; s < draws.cols(); ++s) {
    Eigen::VectorXd dc = draws.col(s).array() - draws.col(s).mean();
    double dn = dc.norm();
    if (!(dn > 0.0)) throw ValidationError("rho_hat: a draw has zero variance");
    acc += dc.dot(tc) / (dn * tn);
  }
  return acc / double(draws.cols());
}

UncapturedSummary uncaptured_summaries(const PosteriorDraws& draws) {
  const int n = draws.n_regions, t_len = draws.n_periods, s_count = draws.n_draws();
  if (s_count == 0) throw std::invalid_argument("uncaptured_summaries: no draws");
  if (!(draws.average_row_sum > 0.0)) throw std::invalid_argument("uncaptured_summaries: average row sum not set");
  UncapturedSummary out;
  double perm = 0.0, total = 0.0;
  for (int s = 0; s < s_count; ++s) {
    for (int i = 0; i < n; ++i) {
      double e = draws.eta_plus(i, s);
      perm += 1.0 - std::exp(-e);
      for (int t = 0; t < t_len; ++t)
        total += 1.0 - std::exp(-(e + draws.u_plus(static_cast<Eigen::Index>(i) * t_len + t, s)));
    }
    const auto& var = draws.variances;
    double sa = std::sqrt(var(PosteriorDraws::kAlpha, s)), se = std::sqrt(var(PosteriorDraws::kEps, s));
    double sv = std::sqrt(var(PosteriorDraws::kV, s)), su = std::sqrt(var(PosteriorDraws::kU, s));
    double sh = std::sqrt(var(PosteriorDraws::kEta, s));
    out.lambda_stat += (sh + su) / se;
    double d = marginal_spatial_sd(sv, draws.average_row_sum);
    out.spatial_share += d / (d + sa + se + sh + su);
  }
  out.permanent_pct = perm / (double(n) * s_count);
  out.total_pct = total / (double(n) * t_len * s_count);
  out.lambda_stat /= s_count;
  out.spatial_share /= s_count;
  return out;
}

UncapturedCells uncaptured_by_cell(const PosteriorDraws& draws) {
  const int n = draws.n_regions, t_len = draws.n_periods, s_count = draws.n_draws();
  if (s_count == 0) throw std::invalid_argument("uncaptured_by_cell: no draws");
  UncapturedCells out{Eigen::MatrixXd::Zero(n, t_len), Eigen::MatrixXd::Zero(n, t_len)};
  for (int i = 0; i < n; ++i) {
    double perm = 0.0;
    for (int s = 0; s < s_count; ++s) perm += 1.0 - std::exp(-draws.eta_plus(i, s));
    out.permanent.row(i).setConstant(perm / s_count);
    for (int t = 0; t < t_len; ++t) {
      const auto row = static_cast<Eigen::Index>(i) * t_len + t;
      double acc = 0.0;
      for (int s = 0; s < s_count; ++s) acc += 1.0 - std::exp(-(draws.eta_plus(i, s) + draws.u_plus(row, s)));
      out.total(i, t) = acc / s_count;
    }
  }
  return out;
}

std::vector<ParameterSummary> summarize_parameters(const PosteriorDraws& draws, double level) {
  std::vector<ParameterSummary> out;
  auto add = [&](std::string name, const std::vector<double>& v) {
    auto iv = v.size() >= 100 ? hdi(v, level) : Interval{kNaN, kNaN};
    out.push_back({std::move(name), mean_of(v), median(v), iv.lower, iv.upper});
  };
  for (int k = 0; k < draws.k_regressors; ++k) add("beta_" + std::to_string(k), row_vector(draws.beta, k));
  const std::pair<const char*, int> sds[] = {{"sigma_eta", PosteriorDraws::kEta}, {"sigma_u", PosteriorDraws::kU},
                                             {"sigma_v", PosteriorDraws::kV},     {"sigma_alpha", PosteriorDraws::kAlpha},
                                             {"sigma_eps", PosteriorDraws::kEps}};
  for (const auto& [name, idx] : sds) {
    auto v = row_vector(draws.variances, idx);
    for (auto& x : v) x = std::sqrt(x);
    add(name, v);
  }
  std::vector<double> lam(static_cast<std::size_t>(draws.n_draws()));
  for (int s = 0; s < draws.n_draws(); ++s) {
    const auto& var = draws.variances;
    lam[static_cast<std::size_t>(s)] =
        (std::sqrt(var(PosteriorDraws::kEta, s)) + std::sqrt(var(PosteriorDraws::kU, s))) /
        std::sqrt(var(PosteriorDraws::kEps, s));
  }
  add("lambda", lam);

  auto latent = [&](std::string name, const Eigen::MatrixXd& m, double sign) {
    Eigen::VectorXd pm = sign * m.rowwise().mean();
    std::vector<double> v(pm.data(), pm.data() + pm.size());
    out.push_back({std::move(name), mean_of(v), median(v), kNaN, kNaN});
  };
  latent("neg_eta_plus", draws.eta_plus, -1.0);
  latent("neg_u_plus", draws.u_plus, -1.0);
  latent("v", draws.v, 1.0);
  return out;
}

}  // namespace hidpop
