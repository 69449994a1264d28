#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/special_functions/gamma.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <vector>

#include "hidpop/errors.hpp"
#include "hidpop/gibbs_sampler.hpp"
#include "hidpop/simulation.hpp"
#include "hidpop/stats_kernels.hpp"
#include "test_support.hpp"

using namespace hidpop;
using hidpop::testing::ks_pvalue;
using hidpop::testing::mean;

namespace {

SimulatedTruth small_truth(std::uint64_t seed, int rows = 4, int cols = 4, int periods = 3) {
  DgpConfig dc;
  dc.rows = rows;
  dc.cols = cols;
  dc.periods = periods;
  dc.seed = seed;
  return simulate(dc);
}

ParameterState truth_state(const SimulatedTruth& t) {
  ParameterState st;
  st.beta = Eigen::Vector2d(0.5, -0.5);
  st.u_plus = t.true_u_plus;
  st.eta_plus = t.true_eta_plus;
  st.v = t.true_v;
  st.sigma2_alpha = 0.01;
  st.sigma2_eps = 0.01;
  st.sigma2_v = 0.16;
  st.sigma2_u = 0.04;
  st.sigma2_eta = 0.25;
  return st;
}

// Batch-means standard error of a correlated series.
double batch_se(const std::vector<double>& x, int batches = 20) {
  const std::size_t len = x.size() / batches;
  std::vector<double> m;
  for (int b = 0; b < batches; ++b)
    m.push_back(std::accumulate(x.begin() + b * len, x.begin() + (b + 1) * len, 0.0) / double(len));
  return std::sqrt(hidpop::testing::variance(m) / batches);
}

double normal_cdf_trunc(double x, double mu, double sd) {
  if (x <= 0.0) return 0.0;
  double z0 = normal_cdf(-mu / sd);
  return (normal_cdf((x - mu) / sd) - z0) / (1.0 - z0);
}

}  // namespace

TEST_CASE("beta conditional reduces to OLS under a flat prior") {
  PanelDataset data;
  const int n = 30, t = 4;
  RandomStream rng(1);
  data.y.resize(n, t);
  data.x.resize(n * t, 1);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < t; ++s) {
      double x = rng.normal();
      data.x(i * t + s, 0) = x;
      data.y(i, s) = 1.7 * x + 0.3 * rng.normal();
    }
  ParameterState st;
  st.beta = Eigen::VectorXd::Zero(1);
  st.u_plus = Eigen::MatrixXd::Zero(n, t);
  st.eta_plus = Eigen::VectorXd::Zero(n);
  st.v = Eigen::VectorXd::Zero(n);
  st.sigma2_alpha = 0.0;
  st.sigma2_eps = 0.09;
  PriorConfig prior;
  prior.beta_cov_scale = 1e12;
  auto cond = beta_conditional(st, data, prior);
  Eigen::VectorXd yv(n * t);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < t; ++s) yv(i * t + s) = data.y(i, s);
  double ols = data.x.col(0).dot(yv) / data.x.col(0).squaredNorm();
  CHECK(cond.mean(0) == doctest::Approx(ols).epsilon(1e-9));
}

TEST_CASE("beta conditional matches dense GLS") {
  auto truth = small_truth(3);
  const auto& data = truth.dataset;
  auto st = truth_state(truth);
  st.sigma2_alpha = 0.07;
  st.sigma2_eps = 0.02;
  PriorConfig prior;
  prior.beta_mean = Eigen::Vector2d(0.2, 0.1);
  prior.beta_cov_scale = 3.0;
  const int n = data.n_regions(), t = data.n_periods();
  Eigen::MatrixXd sigma = 0.02 * Eigen::MatrixXd::Identity(t, t) + 0.07 * Eigen::MatrixXd::Ones(t, t);
  Eigen::MatrixXd sinv = sigma.inverse();
  Eigen::Matrix2d prec = Eigen::Matrix2d::Identity() / 3.0;
  Eigen::Vector2d rhs = prior.beta_mean / 3.0;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd xi = data.x.middleRows(i * t, t);
    Eigen::VectorXd yt(t);
    for (int s = 0; s < t; ++s) yt(s) = data.y(i, s) + st.u_plus(i, s) + st.eta_plus(i) - st.v(i);
    prec += xi.transpose() * sinv * xi;
    rhs += xi.transpose() * sinv * yt;
  }
  Eigen::Vector2d oracle = prec.inverse() * rhs;
  auto cond = beta_conditional(st, data, prior);
  CHECK((cond.mean - oracle).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((cond.precision - prec).cwiseAbs().maxCoeff() < 1e-8 * prec.cwiseAbs().maxCoeff());
}

TEST_CASE("transient errors vanish with their variance") {
  auto truth = small_truth(4);
  auto st = truth_state(truth);
  st.sigma2_u = 1e-12;
  RandomStream rng(2);
  double total = 0.0;
  int count = 0;
  for (int rep = 0; rep < 50; ++rep) {
    auto u = update_u_plus(st, truth.dataset, rng);
    CHECK((u.array() > 0.0).all());
    total += u.sum();
    count += int(u.size());
  }
  CHECK(total / count < 1e-4);
}

TEST_CASE("T=1 transient conditional is the scalar truncated normal") {
  // With T = 1: u | rest ~ N+(m, w), 1/w = 1/(s2e + s2a) + 1/s2u, m = -w d / (s2e + s2a),
  // d = y - x b - v + eta.
  const int n = 20000;
  PanelDataset data;
  data.y = Eigen::MatrixXd::Constant(n, 1, -0.35);
  data.x = Eigen::MatrixXd::Constant(n, 1, 0.4);
  ParameterState st;
  st.beta = Eigen::VectorXd::Constant(1, 0.5);
  st.u_plus = Eigen::MatrixXd::Constant(n, 1, 0.1);
  st.eta_plus = Eigen::VectorXd::Constant(n, 0.05);
  st.v = Eigen::VectorXd::Constant(n, 0.1);
  st.sigma2_alpha = 0.02;
  st.sigma2_eps = 0.03;
  st.sigma2_u = 0.04;
  RandomStream rng(77);
  std::vector<double> draws;
  for (int rep = 0; rep < 5; ++rep) {
    auto u = update_u_plus(st, data, rng);
    draws.insert(draws.end(), u.data(), u.data() + u.size());
  }
  const double tau = 0.05, d = -0.35 - 0.2 - 0.1 + 0.05;
  const double w = 1.0 / (1.0 / tau + 1.0 / 0.04), m = -w * d / tau;
  CHECK(ks_pvalue(draws, [&](double x) { return normal_cdf_trunc(x, m, std::sqrt(w)); }) > 0.01);
}

TEST_CASE("permanent errors: conditional law and degenerate prior") {
  const int n = 50000, t = 3;
  PanelDataset data;
  data.y = Eigen::MatrixXd::Constant(n, t, -0.2);
  data.x = Eigen::MatrixXd::Zero(n * t, 1);
  ParameterState st;
  st.beta = Eigen::VectorXd::Zero(1);
  st.u_plus = Eigen::MatrixXd::Constant(n, t, 0.05);
  st.eta_plus = Eigen::VectorXd::Constant(n, 0.1);
  st.v = Eigen::VectorXd::Constant(n, 0.05);
  st.sigma2_alpha = 0.01;
  st.sigma2_eps = 0.02;
  st.sigma2_eta = 0.25;
  // Dense oracle: eta | rest ~ N+(m, psi2) with psi2 = 1 / (1/s2eta + 1'S^-1 1), m = -psi2 1'S^-1 r,
  // r = y - x b + u - v.
  Eigen::MatrixXd sigma = 0.02 * Eigen::MatrixXd::Identity(t, t) + 0.01 * Eigen::MatrixXd::Ones(t, t);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(t), r = Eigen::VectorXd::Constant(t, -0.2 + 0.05 - 0.05);
  Eigen::VectorXd sinv1 = sigma.lu().solve(ones);
  double psi2 = 1.0 / (1.0 / 0.25 + ones.dot(sinv1));
  double m = -psi2 * sinv1.dot(r);
  CHECK(st.sigma().ones_quad() == doctest::Approx(ones.dot(sinv1)).epsilon(1e-12));
  RandomStream rng(8);
  auto eta = update_eta_plus(st, data, rng);
  std::vector<double> draws(eta.data(), eta.data() + eta.size());
  CHECK(ks_pvalue(draws, [&](double x) { return normal_cdf_trunc(x, m, std::sqrt(psi2)); }) > 0.01);

  st.sigma2_eta = 1e-12;
  eta = update_eta_plus(st, data, rng);
  CHECK((eta.array() > 0.0).all());
  CHECK(eta.mean() < 1e-4);
}

TEST_CASE("first region of the v sweep follows the dense conditional") {
  auto truth = small_truth(5);
  const auto& data = truth.dataset;
  auto graph = build_queen_grid(4, 4);
  auto st = truth_state(truth);
  const int t = data.n_periods();
  // Joint Gaussian of v_0 given v_-0: precision 1'S^-1 1 + Q_00 / s2v,
  // linear term 1'S^-1 r_0 - sum_j Q_0j v_j / s2v with r_0 = y_0 - X_0 b + u_0 + eta_0.
  Eigen::MatrixXd q = graph.car_precision_dense();
  Eigen::MatrixXd sigma = st.sigma().dense();
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(t);
  Eigen::VectorXd r(t);
  for (int s = 0; s < t; ++s)
    r(s) = data.y(0, s) - data.x.row(s).dot(st.beta) + st.u_plus(0, s) + st.eta_plus(0);
  Eigen::VectorXd sinv1 = sigma.lu().solve(ones);
  double prec = ones.dot(sinv1) + q(0, 0) / st.sigma2_v;
  double lin = sinv1.dot(r);
  for (int j = 1; j < graph.n_regions(); ++j) lin -= q(0, j) * st.v(j) / st.sigma2_v;
  double mu = lin / prec, sd = std::sqrt(1.0 / prec);

  RandomStream rng(19);
  std::vector<double> draws;
  for (int rep = 0; rep < 20000; ++rep) draws.push_back(update_v(st, data, graph, false, rng)(0));
  CHECK(ks_pvalue(draws, [&](double x) { return normal_cdf((x - mu) / sd); }) > 0.01);

  auto centred = update_v(st, data, graph, true, rng);
  CHECK(std::abs(centred.sum()) < 1e-10);
}

TEST_CASE("two symmetric regions give mirrored centred effects") {
  PanelDataset data;
  data.y.resize(2, 3);
  data.y << 0.4, 0.5, 0.3, -0.4, -0.5, -0.3;
  data.x = Eigen::MatrixXd::Zero(6, 1);
  SpatialGraph graph({{{1, 1.0}}, {{0, 1.0}}});
  ParameterState st;
  st.beta = Eigen::VectorXd::Zero(1);
  st.u_plus = Eigen::MatrixXd::Constant(2, 3, 0.1);
  st.eta_plus = Eigen::VectorXd::Constant(2, 0.2);
  st.v = Eigen::VectorXd::Zero(2);
  st.sigma2_v = 0.5;
  RandomStream rng(3);
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  const int reps = 40000;
  for (int k = 0; k < reps; ++k) {
    st.v = update_v(st, data, graph, true, rng);
    acc += st.v;
  }
  acc /= reps;
  CHECK(acc(0) > 0.1);
  CHECK(std::abs(acc(0) + acc(1)) < 1e-10);
}

TEST_CASE("variance conditionals") {
  auto graph = build_queen_grid(7, 7);
  PriorConfig prior;
  RandomStream rng(31);
  SUBCASE("sigma2_v with fixed quadratic form 5") {
    ParameterState st;
    st.v = Eigen::VectorXd::Zero(49);
    for (int i = 0; i < 49; ++i) st.v(i) = rng.normal();
    st.v *= std::sqrt(5.0 / car_quadratic_form(graph, {st.v.data(), 49}));
    CHECK(car_quadratic_form(graph, {st.v.data(), 49}) == doctest::Approx(5.0));
    double acc = 0.0;
    const int reps = 1'000'000;
    for (int k = 0; k < reps; ++k) acc += 1.0 / update_sigma2_v(st, graph, prior, CarDf::PanelCells, 5, rng);
    CHECK(std::abs(acc / reps / (246.0 / 5.0001) - 1.0) < 0.005);
    acc = 0.0;
    for (int k = 0; k < reps; ++k) acc += 1.0 / update_sigma2_v(st, graph, prior, CarDf::Regions, 5, rng);
    CHECK(std::abs(acc / reps / (50.0 / 5.0001) - 1.0) < 0.005);
    st.v.setZero();
    CHECK(update_sigma2_v(st, graph, prior, CarDf::PanelCells, 5, rng) < 1e-5);
  }
  SUBCASE("sigma2_u inverse gamma moment") {
    ParameterState st;
    st.u_plus = Eigen::MatrixXd::Constant(10, 4, 0.2);
    const double shape = 0.5 * (40 + 10), scale = 0.5 * (40 * 0.04 + 20.0 * std::pow(std::log(0.85), 2));
    double acc = 0.0;
    const int reps = 1'000'000;
    for (int k = 0; k < reps; ++k) acc += update_sigma2_u(st, prior, rng);
    CHECK(std::abs(acc / reps / (scale / (shape - 1.0)) - 1.0) < 0.005);
  }
  SUBCASE("sigma2_eta at eta = 0, N = 49") {
    ParameterState st;
    st.eta_plus = Eigen::VectorXd::Zero(49);
    double acc = 0.0;
    const int reps = 1'000'000;
    for (int k = 0; k < reps; ++k) acc += update_sigma2_eta(st, prior, rng);
    CHECK(std::abs(acc / reps / (10.0 * std::pow(std::log(0.70), 2) / 28.5) - 1.0) < 0.005);
    st.eta_plus = Eigen::VectorXd::Zero(1);
    CHECK(update_sigma2_eta(st, prior, rng) > 0.0);
  }
}

TEST_CASE("MH variance step samples a known target") {
  // Target: Qbar / s2 ~ chi2(Nbar), so P(s2 <= x) = Q(Nbar/2, Qbar/(2x)).
  for (auto [qbar, nbar, scale] : {std::tuple{1e-4, 1.0, 1.0}, std::tuple{0.5, 6.0, 0.5}, std::tuple{0.5, 6.0, 1.0}}) {
    RandomStream rng(101);
    auto target = [&](double s2) { return scaled_inv_chi2_log_density(s2, qbar, nbar); };
    double x = qbar;
    std::vector<double> draws;
    long accepted = 0, steps = 0;
    for (int k = 0; k < 2000; ++k) x = mh_variance_step(x, target, scale, rng).value;
    while (draws.size() < 100'000) {
      for (int k = 0; k < 10; ++k) {
        auto st = mh_variance_step(x, target, scale, rng);
        x = st.value;
        accepted += st.accepted;
        ++steps;
      }
      draws.push_back(x);
    }
    auto cdf = [&](double v) { return boost::math::gamma_q(0.5 * nbar, qbar / (2.0 * v)); };
    CAPTURE(nbar);
    CAPTURE(scale);
    CHECK(ks_pvalue(draws, cdf) > 0.01);
    CHECK(accepted > 0);
    CHECK(accepted < steps);
  }
}

TEST_CASE("conjugate beta chain") {
  // u+ = eta+ = v = 0, sigma2_alpha = 0 and sigma2_eps fixed: beta has a
  // Gaussian posterior known in closed form.
  auto truth = small_truth(9, 5, 5, 4);
  auto data = truth.dataset;
  const int n = data.n_regions(), t = data.n_periods();
  auto graph = build_queen_grid(5, 5);
  ParameterState st;
  st.beta = Eigen::Vector2d::Zero();
  st.u_plus = Eigen::MatrixXd::Zero(n, t);
  st.eta_plus = Eigen::VectorXd::Zero(n);
  st.v = Eigen::VectorXd::Zero(n);
  st.sigma2_alpha = 0.0;
  st.sigma2_eps = 0.05;
  st.sigma2_v = 1.0;
  PriorConfig prior;
  prior.beta_cov_scale = 2.0;
  ChainConfig cc;
  cc.n_iter = 41000;
  cc.burn_in = 1000;
  cc.thin = 1;
  cc.seed = 12;
  auto& fz = cc.frozen;
  fz.u_plus = fz.eta_plus = fz.v = fz.sigma2_v = fz.sigma2_u = fz.sigma2_eta = fz.sigma2_alpha = fz.sigma2_eps = true;
  auto draws = run_chain(data, graph, prior, cc, st);

  Eigen::VectorXd yv(n * t);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < t; ++s) yv(i * t + s) = data.y(i, s);
  Eigen::Matrix2d prec = data.x.transpose() * data.x / 0.05 + Eigen::Matrix2d::Identity() / 2.0;
  Eigen::Matrix2d cov = prec.inverse();
  Eigen::Vector2d post_mean = cov * (data.x.transpose() * yv / 0.05);

  Eigen::Vector2d m = draws.beta.rowwise().mean();
  Eigen::MatrixXd centred = draws.beta.colwise() - m;
  Eigen::Matrix2d emp = centred * centred.transpose() / double(draws.n_draws() - 1);
  for (int k = 0; k < 2; ++k) {
    double se = std::sqrt(cov(k, k) / draws.n_draws());
    CHECK(std::abs(m(k) - post_mean(k)) < 2.5 * se);
    CHECK(std::abs(emp(k, k) / cov(k, k) - 1.0) < 0.05);
  }
  CHECK(std::abs(emp(0, 1) - cov(0, 1)) < 0.05 * std::sqrt(cov(0, 0) * cov(1, 1)));
}

TEST_CASE("chain bookkeeping and determinism") {
  auto truth = small_truth(2);
  auto graph = build_queen_grid(4, 4);
  ChainConfig cc;
  cc.n_iter = 60;
  cc.burn_in = 55;
  cc.thin = 5;
  CHECK(run_chain(truth.dataset, graph, PriorConfig{}, cc).n_draws() == 1);

  cc.n_iter = 400;
  cc.burn_in = 200;
  cc.thin = 2;
  cc.seed = 77;
  auto a = run_chains(truth.dataset, graph, PriorConfig{}, cc, 3);
  auto b = run_chains(truth.dataset, graph, PriorConfig{}, cc, 3);
  CHECK(a.n_draws() == 300);
  CHECK(a.beta == b.beta);
  CHECK(a.u_plus == b.u_plus);
  CHECK(a.eta_plus == b.eta_plus);
  CHECK(a.v == b.v);
  CHECK(a.variances == b.variances);
  CHECK(a.chain == b.chain);
  CHECK(a.chain.front() == 0);
  CHECK(a.chain.back() == 2);
  CHECK((a.u_plus.array() > 0.0).all());
  CHECK((a.eta_plus.array() > 0.0).all());
  CHECK((a.variances.array() > 0.0).all());
  // Chains differ from each other.
  CHECK(a.beta.col(0) != a.beta.col(100));

  auto single = run_chain(truth.dataset, graph, PriorConfig{}, cc);
  CHECK(single.beta == a.beta.leftCols(100));
}

TEST_CASE("input validation") {
  auto truth = small_truth(2);
  ChainConfig cc;
  cc.n_iter = 100;
  cc.burn_in = 100;
  CHECK_THROWS_AS(cc.validate(), ValidationError);
  cc.burn_in = 10;
  cc.thin = 0;
  CHECK_THROWS_AS(cc.validate(), ValidationError);
  cc.thin = 1;
  CHECK_THROWS_AS(run_chain(truth.dataset, build_queen_grid(3, 3), PriorConfig{}, cc), ValidationError);
  PriorConfig bad;
  bad.r_star_u = 1.0;
  CHECK_THROWS_AS(run_chain(truth.dataset, build_queen_grid(4, 4), bad, cc), ValidationError);
  auto st = initial_state(truth.dataset);
  st.u_plus(0, 0) = -1.0;
  CHECK_THROWS_AS(run_chain(truth.dataset, build_queen_grid(4, 4), PriorConfig{}, cc, st), ValidationError);
}

TEST_CASE("region relabelling permutes region-level posterior means") {
  auto truth = small_truth(6, 4, 4, 4);
  auto graph = build_queen_grid(4, 4);
  const int n = 16, t = 4;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  RandomStream prng(5);
  std::shuffle(perm.begin(), perm.end(), prng.engine());

  PanelDataset pdata;
  pdata.y.resize(n, t);
  pdata.x.resize(n * t, 2);
  for (int i = 0; i < n; ++i) {
    int p = perm[static_cast<std::size_t>(i)];
    pdata.y.row(p) = truth.dataset.y.row(i);
    pdata.x.middleRows(p * t, t) = truth.dataset.x.middleRows(i * t, t);
  }
  auto pgraph = graph.permuted(perm);

  // Variances held at their true values keep the posterior unimodal.
  ChainConfig cc;
  cc.n_iter = 42000;
  cc.burn_in = 2000;
  cc.thin = 2;
  auto& fz = cc.frozen;
  fz.sigma2_v = fz.sigma2_u = fz.sigma2_eta = fz.sigma2_alpha = fz.sigma2_eps = true;
  auto st = truth_state(truth);
  ParameterState pst = st;
  for (int i = 0; i < n; ++i) {
    int p = perm[static_cast<std::size_t>(i)];
    pst.u_plus.row(p) = st.u_plus.row(i);
    pst.eta_plus(p) = st.eta_plus(i);
    pst.v(p) = st.v(i);
  }
  cc.seed = 1;
  auto a = run_chain(truth.dataset, graph, PriorConfig{}, cc, st);
  cc.seed = 2;
  auto b = run_chain(pdata, pgraph, PriorConfig{}, cc, pst);
  int outside = 0;
  for (int i = 0; i < n; ++i) {
    int p = perm[static_cast<std::size_t>(i)];
    for (const Eigen::MatrixXd* block : {&a.eta_plus, &a.v}) {
      const Eigen::MatrixXd& other = block == &a.eta_plus ? b.eta_plus : b.v;
      std::vector<double> xa(block->cols()), xb(other.cols());
      for (Eigen::Index s = 0; s < block->cols(); ++s) xa[s] = (*block)(i, s);
      for (Eigen::Index s = 0; s < other.cols(); ++s) xb[s] = other(p, s);
      double se = std::hypot(batch_se(xa), batch_se(xb));
      if (std::abs(mean(xa) - mean(xb)) > 3.5 * se) ++outside;
    }
  }
  CHECK(outside <= 1);
}
