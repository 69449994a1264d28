#include "hidpop/simulation.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hidpop/csv.hpp"
#include "hidpop/errors.hpp"
#include "hidpop/random_stream.hpp"

namespace hidpop {

void DgpConfig::validate() const {
  if (rows < 1 || cols < 1 || rows * cols < 2) throw ValidationError("dgp: grid needs at least two cells");
  if (periods < 1) throw ValidationError("dgp: periods must be >= 1");
  for (double s : {sigma_alpha, sigma_eta, sigma_u, sigma_eps, sigma_v})
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("dgp: all sigmas must be positive");
  if (eps_law == ErrorLaw::StudentT && !(t_df > 2.0)) throw ValidationError("dgp: Student-t df must exceed 2");
}

SimulatedTruth simulate(const DgpConfig& config) {
  config.validate();
  return simulate(config, build_queen_grid(config.rows, config.cols));
}

SimulatedTruth simulate(const DgpConfig& config, const SpatialGraph& graph) {
  config.validate();
  const int n = graph.n_regions(), t_len = config.periods;
  RandomStream rng(config.seed);

  Eigen::MatrixXd z(n, t_len);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < t_len; ++t) z(i, t) = rng.normal();

  Eigen::VectorXd alpha(n);
  for (int i = 0; i < n; ++i) alpha(i) = config.sigma_alpha * rng.normal();

  // Spectral draw on the non-null eigenspace of D_w - W.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(graph.car_precision_dense());
  const double tol = 1e-9 * es.eigenvalues().cwiseAbs().maxCoeff();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < n; ++k) {
    double lam = es.eigenvalues()(k);
    if (lam <= tol) continue;
    v += (config.sigma_v / std::sqrt(lam)) * rng.normal() * es.eigenvectors().col(k);
  }

  Eigen::VectorXd eta(n);
  for (int i = 0; i < n; ++i) eta(i) = config.sigma_eta * std::abs(rng.normal());
  Eigen::MatrixXd u(n, t_len);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < t_len; ++t) u(i, t) = config.sigma_u * std::abs(rng.normal());
  Eigen::MatrixXd eps(n, t_len);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < t_len; ++t)
      eps(i, t) = config.sigma_eps * (config.eps_law == ErrorLaw::StudentT ? rng.student_t(config.t_df) : rng.normal());

  SimulatedTruth out;
  auto& data = out.dataset;
  data.y.resize(n, t_len);
  data.x.resize(static_cast<Eigen::Index>(n) * t_len, 2);
  out.true_P.resize(n, t_len);
  std::vector<double> zt(static_cast<std::size_t>(n));
  for (int t = 0; t < t_len; ++t) {
    for (int i = 0; i < n; ++i) zt[static_cast<std::size_t>(i)] = z(i, t);
    for (int i = 0; i < n; ++i) {
      double lag = graph.neighbor_sum(i, zt);
      auto row = i * t_len + t;
      data.x(row, 0) = z(i, t);
      data.x(row, 1) = lag;
      double frontier = config.beta_true(0) * z(i, t) + config.beta_true(1) * lag + alpha(i) + v(i) + eps(i, t);
      data.y(i, t) = frontier - eta(i) - u(i, t);
      out.true_P(i, t) = std::exp(frontier);
    }
  }
  out.true_u_plus = std::move(u);
  out.true_eta_plus = std::move(eta);
  out.true_v = std::move(v);
  out.true_alpha = std::move(alpha);
  out.true_eps = std::move(eps);
  return out;
}

double lambda_of(const DgpConfig& config) { return (config.sigma_eta + config.sigma_u) / config.sigma_eps; }

DgpConfig make_lambda_scenario(double target_lambda, const DgpConfig& base) {
  if (!(target_lambda > 0.0) || !std::isfinite(target_lambda))
    throw std::invalid_argument("make_lambda_scenario: target lambda must be positive");
  DgpConfig out = base;
  out.sigma_eps = (base.sigma_eta + base.sigma_u) / target_lambda;
  return out;
}

TruthTable truth_table(const SimulatedTruth& truth) {
  return {truth.true_u_plus, truth.true_eta_plus, truth.true_v, truth.true_alpha, truth.true_P};
}

void write_truth_csv(std::ostream& out, const SimulatedTruth& truth) {
  out << "region,time,u_plus,eta_plus,v,alpha,P\n" << std::setprecision(17);
  for (int i = 0; i < truth.true_u_plus.rows(); ++i)
    for (int t = 0; t < truth.true_u_plus.cols(); ++t)
      out << i << ',' << t << ',' << truth.true_u_plus(i, t) << ',' << truth.true_eta_plus(i) << ','
          << truth.true_v(i) << ',' << truth.true_alpha(i) << ',' << truth.true_P(i, t) << '\n';
}

TruthTable read_truth_csv(std::istream& in) {
  CsvReader reader(in);
  const std::vector<std::string> expected{"region", "time", "u_plus", "eta_plus", "v", "alpha", "P"};
  if (reader.header() != expected) throw FormatError("truth CSV header must be `region,time,u_plus,eta_plus,v,alpha,P`", 1);
  struct Row {
    long i, t;
    double u, eta, v, alpha, p;
  };
  std::vector<Row> rows;
  long n = 0, t_len = 0;
  while (auto rec = reader.next()) {
    if (rec->size() != expected.size()) throw FormatError("wrong number of fields", reader.line());
    auto ln = reader.line();
    Row r{parse_long((*rec)[0], ln), parse_long((*rec)[1], ln), parse_double((*rec)[2], ln), parse_double((*rec)[3], ln),
          parse_double((*rec)[4], ln), parse_double((*rec)[5], ln), parse_double((*rec)[6], ln)};
    if (r.i < 0 || r.t < 0) throw FormatError("negative index", ln);
    n = std::max(n, r.i + 1);
    t_len = std::max(t_len, r.t + 1);
    rows.push_back(r);
  }
  if (rows.empty() || static_cast<long>(rows.size()) != n * t_len) throw ValidationError("truth table is not balanced");
  TruthTable tt;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  tt.u_plus.setConstant(n, t_len, nan);
  tt.P.setConstant(n, t_len, nan);
  tt.eta_plus.setConstant(n, nan);
  tt.v.setConstant(n, nan);
  tt.alpha.setConstant(n, nan);
  for (const auto& r : rows) {
    tt.u_plus(r.i, r.t) = r.u;
    tt.P(r.i, r.t) = r.p;
    tt.eta_plus(r.i) = r.eta;
    tt.v(r.i) = r.v;
    tt.alpha(r.i) = r.alpha;
  }
  if (!tt.u_plus.allFinite() || !tt.P.allFinite()) throw ValidationError("truth table has missing cells");
  return tt;
}

TruthTable read_truth_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open truth file " + path.string());
  return read_truth_csv(in);
}

}  // namespace hidpop
