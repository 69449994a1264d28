// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. Pass criterion numbers as arguments
// to run a subset.
#include <boost/math/quadrature/exp_sinh.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "hidpop/draws_io.hpp"
#include "hidpop/gibbs_sampler.hpp"
#include "hidpop/posterior_analysis.hpp"
#include "hidpop/simulation.hpp"
#include "hidpop/sir_screening.hpp"
#include "hidpop/spatial_graph.hpp"
#include "hidpop/stats_kernels.hpp"

using namespace hidpop;

namespace {

struct Fit {
  SimulatedTruth truth;
  PosteriorDraws draws;
  double seconds = 0.0;
};

using FitKey = std::tuple<int, int, std::uint64_t, std::string>;
std::map<FitKey, Fit> g_fits;

// `variant` only labels the cache entry; `dc` carries the design.
const Fit& fit(const DgpConfig& dc, const std::string& variant = "default", CarDf df = CarDf::PanelCells) {
  FitKey key{dc.rows, dc.periods, dc.seed, variant};
  auto it = g_fits.find(key);
  if (it != g_fits.end()) return it->second;
  Fit f;
  f.truth = simulate(dc);
  ChainConfig cc;  // 20000 / 10000 / 5
  cc.seed = dc.seed;
  cc.car_df = df;
  auto t0 = std::chrono::steady_clock::now();
  f.draws = run_chain(f.truth.dataset, build_queen_grid(dc.rows, dc.cols), PriorConfig{}, cc);
  f.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  [fit %dx%d T=%d seed=%llu %s: %.1fs, acc alpha %.2f eps %.2f]\n", dc.rows, dc.cols, dc.periods,
              static_cast<unsigned long long>(dc.seed), variant.c_str(), f.seconds,
              double(f.draws.diagnostics[0].accepted_alpha) / double(f.draws.diagnostics[0].proposals_alpha),
              double(f.draws.diagnostics[0].accepted_eps) / double(f.draws.diagnostics[0].proposals_eps));
  return g_fits.emplace(key, std::move(f)).first->second;
}

DgpConfig design(int side, int periods, std::uint64_t seed) {
  DgpConfig dc;
  dc.rows = dc.cols = side;
  dc.periods = periods;
  dc.seed = seed;
  return dc;
}

std::vector<double> row(const Eigen::MatrixXd& m, int r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = m(r, c);
  return out;
}

double mean_sd(const PosteriorDraws& d, int which) { return d.variances.row(which).array().sqrt().mean(); }

Eigen::MatrixXd level_scale(const PanelDataset& data) { return data.y.array().exp().matrix(); }

bool report(int id, bool ok, const std::string& detail) {
  std::printf("CRITERION %d %s: %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  return ok;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool criterion1() {
  struct Span {
    const char* name;
    int which;
    double lo, hi;
  };
  const Span spans[] = {{"sigma_eta", PosteriorDraws::kEta, 0.387, 0.576},
                        {"sigma_u", PosteriorDraws::kU, 0.156, 0.249},
                        {"sigma_v", PosteriorDraws::kV, 0.185, 0.513},
                        {"sigma_eps", PosteriorDraws::kEps, 0.059, 0.131}};
  const double truth_beta[2] = {0.5, -0.5};
  double sd_avg[4] = {}, beta_mean[2] = {}, lo[2] = {}, hi[2] = {}, regions_v = 0.0, worst_secs = 0.0;
  const int seeds = 5;
  for (int s = 1; s <= seeds; ++s) {
    const auto& f = fit(design(7, 5, s));
    worst_secs = std::max(worst_secs, f.seconds);
    for (int k = 0; k < 4; ++k) sd_avg[k] += mean_sd(f.draws, spans[k].which) / seeds;
    for (int k = 0; k < 2; ++k) {
      auto b = row(f.draws.beta, k);
      auto iv = hdi(b, 0.95);
      double m = f.draws.beta.row(k).mean();
      std::printf("  seed %d beta_%d mean %.3f HDI (%.3f, %.3f)\n", s, k + 1, m, iv.lower, iv.upper);
      beta_mean[k] += m / seeds;
      lo[k] += iv.lower / seeds;
      hi[k] += iv.upper / seeds;
    }
    std::printf("  seed %d sigma means: eta %.3f u %.3f v %.3f eps %.3f alpha %.3f\n", s,
                mean_sd(f.draws, PosteriorDraws::kEta), mean_sd(f.draws, PosteriorDraws::kU),
                mean_sd(f.draws, PosteriorDraws::kV), mean_sd(f.draws, PosteriorDraws::kEps),
                mean_sd(f.draws, PosteriorDraws::kAlpha));
    // Informational: the alternative degrees-of-freedom convention for sigma_v.
    regions_v += mean_sd(fit(design(7, 5, s), "car-df-regions", CarDf::Regions).draws, PosteriorDraws::kV) / seeds;
  }
  bool ok = true;
  std::string detail;
  for (int k = 0; k < 2; ++k) {
    bool in = lo[k] <= truth_beta[k] && truth_beta[k] <= hi[k];
    bool close = std::abs(beta_mean[k] - truth_beta[k]) <= 0.05;
    ok = ok && in && close;
    char buf[160];
    std::snprintf(buf, sizeof buf, "beta_%d mean %.3f HDI (%.3f, %.3f)%s; ", k + 1, beta_mean[k], lo[k], hi[k],
                  in && close ? "" : " [out]");
    detail += buf;
  }
  for (int k = 0; k < 4; ++k) {
    bool in = spans[k].lo <= sd_avg[k] && sd_avg[k] <= spans[k].hi;
    ok = ok && in;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s %.3f in [%.3f, %.3f]%s; ", spans[k].name, sd_avg[k], spans[k].lo, spans[k].hi,
                  in ? "" : " [out]");
    detail += buf;
  }
  bool fast = worst_secs < 300.0;
  ok = ok && fast;
  detail += fmt("slowest chain %.1fs", worst_secs);
  std::printf("  info: sigma_v 5-seed mean under --car-df n: %.3f\n", regions_v);
  return report(1, ok, detail);
}

bool criterion2() {
  auto width = [](const Fit& f) {
    auto iv = hdi(row(f.draws.beta, 0), 0.95);
    return iv.upper - iv.lower;
  };
  double small = width(fit(design(7, 5, 1))), large = width(fit(design(14, 10, 1)));
  char buf[128];
  std::snprintf(buf, sizeof buf, "beta_1 HDI width %.4f at N=196,T=10 vs %.4f at N=49,T=5", large, small);
  return report(2, large < small, buf);
}

bool criterion3() {
  const auto& f = fit(design(10, 10, 1));
  auto y = level_scale(f.truth.dataset);
  const double levels[3] = {0.90, 0.95, 0.99}, tol[3] = {0.07, 0.05, 0.02};
  bool ok = true;
  std::string detail;
  RandomStream rng(2024);
  for (int k = 0; k < 3; ++k) {
    auto ivs = hidden_population_intervals(f.draws, y, levels[k]);
    auto rep = coverage_report(ivs, f.truth.true_P, levels[k], 10000, rng);
    bool in = std::abs(rep.posterior_mean_coverage - levels[k]) <= tol[k];
    ok = ok && in;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.2f -> %.3f (%.3f, %.3f)%s; ", levels[k], rep.posterior_mean_coverage,
                  rep.coverage_hdi.lower, rep.coverage_hdi.upper, in ? "" : " [out]");
    detail += buf;
  }
  return report(3, ok, detail);
}

bool criterion4() {
  const int sizes[5][2] = {{7, 5}, {7, 10}, {10, 5}, {10, 10}, {14, 10}};
  bool ok = true;
  std::string detail;
  for (const auto& s : sizes) {
    const auto& f = fit(design(s[0], s[1], 1));
    auto m = mape_summary(f.draws, level_scale(f.truth.dataset), f.truth.true_P);
    bool in = m.median <= 0.15 && m.average <= 0.35;
    ok = ok && in;
    char buf[160];
    std::snprintf(buf, sizeof buf, "N=%d,T=%d median %.3f average %.3f%s; ", s[0] * s[0], s[1], m.median, m.average,
                  in ? "" : " [out]");
    detail += buf;
  }
  return report(4, ok, detail);
}

bool criterion5() {
  auto high = make_lambda_scenario(10.0, design(7, 5, 1));
  const auto& fh = fit(high, "lambda-10");
  double b1 = fh.draws.beta.row(0).mean();
  auto low = make_lambda_scenario(0.1, design(7, 5, 1));
  const auto& fl = fit(low, "lambda-0.1");
  Eigen::VectorXd sa = fl.draws.variances.row(PosteriorDraws::kAlpha).array().sqrt();
  auto iv = hdi(std::vector<double>(sa.data(), sa.data() + sa.size()), 0.95);
  std::printf("  info: lambda=0.1 sigma_alpha HDI (%.3f, %.3f)\n", iv.lower, iv.upper);
  bool ok = std::abs(b1 - 0.5) <= 0.06;
  return report(5, ok, fmt("lambda=10 beta_1 mean %.3f (truth 0.5, tolerance 0.06)", b1));
}

bool criterion6() {
  auto dc = design(7, 5, 1);
  dc.eps_law = ErrorLaw::StudentT;
  dc.t_df = 4.0;
  const auto& f = fit(dc, "student-t4");
  const double truth[2] = {0.5, -0.5};
  bool ok = true;
  std::string detail;
  for (int k = 0; k < 2; ++k) {
    auto iv = hdi(row(f.draws.beta, k), 0.95);
    bool in = iv.lower <= truth[k] && truth[k] <= iv.upper;
    ok = ok && in;
    char buf[128];
    std::snprintf(buf, sizeof buf, "beta_%d HDI (%.3f, %.3f)%s; ", k + 1, iv.lower, iv.upper, in ? "" : " [out]");
    detail += buf;
  }
  int contained = 0;
  for (int seed = 1; seed <= 5; ++seed) {
    auto other = dc;
    other.seed = seed;
    const auto& g = fit(other, "student-t4");
    bool both = true;
    for (int k = 0; k < 2; ++k) {
      auto iv = hdi(row(g.draws.beta, k), 0.95);
      both = both && iv.lower <= truth[k] && truth[k] <= iv.upper;
    }
    contained += both;
  }
  std::printf("  info: both beta HDIs contain truth in %d of 5 seeds\n", contained);
  return report(6, ok, detail);
}

// Property checks against independent oracles.
bool criterion7() {
  RandomStream rng(77);
  std::vector<std::string> failed;
  auto check = [&](bool ok, const char* name) {
    if (!ok) failed.emplace_back(name);
  };

  {  // rank-one inverse vs dense inverse
    double worst = 0.0;
    for (int rep = 0; rep < 500; ++rep) {
      int t = 1 + int(rng.uniform() * 12);
      CompoundSymmetricCov cov(std::exp(rng.normal() - 2.0), std::exp(rng.normal() - 2.0), t);
      Eigen::MatrixXd dense_inv = cov.dense().inverse();
      worst = std::max(worst, (sigma_inverse(cov) - dense_inv).cwiseAbs().maxCoeff() / dense_inv.cwiseAbs().maxCoeff());
    }
    check(worst < 1e-10, "rank-one inverse");
  }
  {  // conditional MVN vs precision-based Schur oracle
    double worst = 0.0;
    for (int rep = 0; rep < 500; ++rep) {
      int t = 2 + int(rng.uniform() * 7);
      Eigen::MatrixXd a(t, t);
      for (int i = 0; i < t; ++i)
        for (int j = 0; j < t; ++j) a(i, j) = rng.normal();
      Eigen::MatrixXd cov = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(t, t);
      Eigen::VectorXd mu(t), others(t - 1);
      for (int k = 0; k < t; ++k) mu(k) = rng.normal();
      for (int k = 0; k < t - 1; ++k) others(k) = rng.normal();
      int idx = int(rng.uniform() * t);
      Eigen::MatrixXd prec = cov.inverse();
      double shift = 0.0;
      for (int k = 0, o = 0; k < t; ++k)
        if (k != idx) shift += prec(idx, k) * (others(o++) - mu(k));
      auto c = conditional_mvn(mu, cov, idx, others);
      worst = std::max(worst, std::abs(c.mean - (mu(idx) - shift / prec(idx, idx))) / (1.0 + std::abs(c.mean)));
      worst = std::max(worst, std::abs(c.variance - 1.0 / prec(idx, idx)) / (1.0 + c.variance));
    }
    check(worst < 1e-9, "conditional MVN");
  }
  {  // truncated normal at zero is half-normal
    const int n = 1'000'000;
    double s1 = 0.0, s2 = 0.0;
    for (int k = 0; k < n; ++k) {
      double x = sample_truncated_normal({0.0, 1.0, 0.0}, rng);
      s1 += x;
      s2 += x * x;
    }
    const double pi = std::acos(-1.0);
    double m = s1 / n, var = s2 / n - m * m;
    check(std::abs(m - std::sqrt(2.0 / pi)) < 5.0 * std::sqrt((1.0 - 2.0 / pi) / n), "half-normal mean");
    check(std::abs(var - (1.0 - 2.0 / pi)) < 0.005, "half-normal variance");
  }
  {  // conjugate beta chain: every block but beta frozen at a degenerate point
    DgpConfig dc = design(5, 5, 9);
    auto truth = simulate(dc);
    const auto& data = truth.dataset;
    const int n = data.n_regions(), t = data.n_periods();
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
    auto draws = run_chain(data, build_queen_grid(5, 5), prior, cc, st);
    Eigen::VectorXd yv(n * t);
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < t; ++s) yv(i * t + s) = data.y(i, s);
    Eigen::Matrix2d post_cov = (data.x.transpose() * data.x / 0.05 + Eigen::Matrix2d::Identity() / 2.0).inverse();
    Eigen::Vector2d post_mean = post_cov * (data.x.transpose() * yv / 0.05);
    Eigen::Vector2d m = draws.beta.rowwise().mean();
    Eigen::MatrixXd centred = draws.beta.colwise() - m;
    Eigen::Matrix2d emp = centred * centred.transpose() / double(draws.n_draws() - 1);
    bool ok = true;
    for (int k = 0; k < 2; ++k) {
      ok = ok && std::abs(m(k) - post_mean(k)) < 3.0 * std::sqrt(post_cov(k, k) / draws.n_draws());
      ok = ok && std::abs(emp(k, k) / post_cov(k, k) - 1.0) < 0.05;
    }
    check(ok, "conjugate beta chain");
  }
  {  // CAR quadratic form: pairwise sum vs dense precision
    double worst = 0.0;
    for (int side : {2, 3, 7, 10}) {
      auto g = build_queen_grid(side, side + 1);
      Eigen::MatrixXd q = g.car_precision_dense();
      for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd v(g.n_regions());
        for (int i = 0; i < v.size(); ++i) v(i) = rng.normal();
        double dense = v.dot(q * v);
        double pairwise = car_quadratic_form(g, {v.data(), static_cast<std::size_t>(v.size())});
        worst = std::max(worst, std::abs(dense - pairwise) / (1.0 + std::abs(dense)));
      }
    }
    check(worst < 1e-10, "CAR quadratic form");
  }
  {  // exceedance vs quadrature of the gamma density
    double worst = 0.0;
    boost::math::quadrature::exp_sinh<double> tail;
    for (double s : {0.0, 3.0, 20.0, 30.0, 75.0})
      for (double e : {0.5, 5.0, 20.0, 60.0}) {
        double shape = s + 0.01, rate = e + 0.01;
        double log_norm = shape * std::log(rate) - std::lgamma(shape);
        double q = tail.integrate(
            [&](double x) { return std::exp(log_norm + (shape - 1.0) * std::log1p(x) - rate * (1.0 + x)); }, 1e-14);
        worst = std::max(worst, std::abs(q - exceedance_probability(s, e)));
      }
    check(worst < 1e-8, "exceedance probability");
  }
  {  // Beta posterior mean identity: mean of the draws matches a / (a + b)
    bool ok = true;
    for (int hits : {0, 60, 123, 245}) {
      std::vector<HiddenPopulationInterval> ivs;
      Eigen::MatrixXd p = Eigen::MatrixXd::Ones(49, 5);
      for (int i = 0; i < 49; ++i)
        for (int s = 0; s < 5; ++s) {
          bool hit = i * 5 + s < hits;
          ivs.push_back({i, s, 1.0, hit ? 0.5 : 2.0, hit ? 1.5 : 3.0, 0.95});
        }
      auto rep = coverage_report(ivs, p, 0.95, 200000, rng);
      double a = 1.0 + hits, b = 1.0 + 245 - hits;
      double sd = std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0)));
      ok = ok && rep.a == a && rep.b == b &&
           std::abs(rep.posterior_mean_coverage - a / (a + b)) < 5.0 * sd / std::sqrt(200000.0);
    }
    check(ok, "Beta mean identity");
  }
  std::string detail = failed.empty() ? "7 oracle suites agree" : "failed:";
  for (const auto& f : failed) detail += " " + f + ";";
  return report(7, failed.empty(), detail);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool criterion8() {
  auto truth = simulate(design(7, 5, 3));
  ChainConfig cc;
  cc.n_iter = 4000;
  cc.burn_in = 2000;
  cc.seed = 7;
  auto dir = std::filesystem::temp_directory_path() / "hidpop_acceptance_determinism";
  std::filesystem::create_directories(dir);
  for (int run = 0; run < 2; ++run) {
    auto draws = run_chains(truth.dataset, build_queen_grid(7, 7), PriorConfig{}, cc, 4);
    write_draws(dir / ("run" + std::to_string(run) + ".bin"), draws);
  }
  auto a = slurp(dir / "run0.bin"), b = slurp(dir / "run1.bin");
  std::filesystem::remove_all(dir);
  bool ok = !a.empty() && a == b;
  return report(8, ok, "4-chain draws files " + std::to_string(a.size()) + " bytes, " + (ok ? "identical" : "differ"));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int k = 1; k < argc; ++k) only.insert(std::atoi(argv[k]));
  bool (*criteria[])() = {criterion1, criterion2, criterion3, criterion4,
                          criterion5, criterion6, criterion7, criterion8};
  int failures = 0;
  for (int k = 0; k < 8; ++k) {
    if (!only.empty() && !only.count(k + 1)) continue;
    try {
      failures += !criteria[k]();
    } catch (const std::exception& e) {
      failures += !report(k + 1, false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
