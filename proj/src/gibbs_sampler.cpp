#include "hidpop/gibbs_sampler.hpp"

#include <cmath>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "hidpop/errors.hpp"

namespace hidpop {

namespace {

// y - X beta, stacked N x T.
Eigen::MatrixXd linear_residual(const ParameterState& state, const PanelDataset& data) {
  Eigen::VectorXd xb = data.x * state.beta;
  Eigen::MatrixXd r(data.n_regions(), data.n_periods());
  const int t_len = data.n_periods();
  for (int i = 0; i < data.n_regions(); ++i)
    for (int t = 0; t < t_len; ++t) r(i, t) = data.y(i, t) - xb(i * t_len + t);
  return r;
}

double log_sq(double r) {
  double l = std::log(r);
  return l * l;
}

}  // namespace

void ParameterState::validate(const PanelDataset& data) const {
  const int n = data.n_regions(), t = data.n_periods();
  if (beta.size() != data.k_regressors() || u_plus.rows() != n || u_plus.cols() != t || eta_plus.size() != n ||
      v.size() != n)
    throw ValidationError("parameter state shape does not match the panel");
  if ((u_plus.array() <= 0.0).any()) throw ValidationError("u_plus must be strictly positive");
  if ((eta_plus.array() <= 0.0).any()) throw ValidationError("eta_plus must be strictly positive");
  for (double s2 : {sigma2_alpha, sigma2_eps, sigma2_v, sigma2_u, sigma2_eta})
    if (!(s2 > 0.0) || !std::isfinite(s2)) throw ValidationError("variances must be positive and finite");
}

void PriorConfig::validate() const {
  for (double p : {beta_cov_scale, qbar_eps, qbar_alpha, qbar_v, nbar_eps, nbar_alpha, nbar_v, v0_u, v0_eta})
    if (!(p > 0.0)) throw ValidationError("prior hyperparameters must be positive");
  for (double r : {r_star_u, r_star_eta})
    if (!(r > 0.0 && r < 1.0)) throw ValidationError("prior median report rates must lie in (0, 1)");
}

Eigen::VectorXd PriorConfig::beta_mean_or_zero(int k) const {
  if (beta_mean.size() == 0) return Eigen::VectorXd::Zero(k);
  if (beta_mean.size() != k) throw ValidationError("prior beta mean has the wrong length");
  return beta_mean;
}

void ChainConfig::validate() const {
  if (n_iter < 1 || burn_in < 0 || burn_in >= n_iter) throw ValidationError("chain: need 0 <= burn_in < n_iter");
  if (thin < 1) throw ValidationError("chain: thin must be >= 1");
  if (n_stored() < 1) throw ValidationError("chain: settings store no draws");
  if (!(mh_step_scale_alpha > 0.0) || !(mh_step_scale_eps > 0.0))
    throw ValidationError("chain: MH step scales must be positive");
}

ParameterState PosteriorDraws::state(int s) const {
  ParameterState st;
  st.beta = beta.col(s);
  st.u_plus = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      u_plus.col(s).data(), n_regions, n_periods);
  st.eta_plus = eta_plus.col(s);
  st.v = v.col(s);
  st.sigma2_alpha = variances(kAlpha, s);
  st.sigma2_eps = variances(kEps, s);
  st.sigma2_v = variances(kV, s);
  st.sigma2_u = variances(kU, s);
  st.sigma2_eta = variances(kEta, s);
  return st;
}

BetaConditional beta_conditional(const ParameterState& state, const PanelDataset& data, const PriorConfig& prior) {
  const int k = data.k_regressors(), t_len = data.n_periods();
  const auto cov = state.sigma();
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < data.n_regions(); ++i) {
    auto xi = data.regressors(i);
    // u+ and eta+ are subtracted in the model, so y~ = y + u+ + eta+ - v.
    Eigen::VectorXd yt = data.y.row(i).transpose() + state.u_plus.row(i).transpose() +
                         Eigen::VectorXd::Constant(t_len, state.eta_plus(i) - state.v(i));
    Eigen::VectorXd colsum = xi.colwise().sum().transpose();
    xtx.noalias() += (xi.transpose() * xi - cov.shrinkage() * colsum * colsum.transpose()) / cov.sigma2_eps();
    xty.noalias() += (xi.transpose() * yt - cov.shrinkage() * colsum * yt.sum()) / cov.sigma2_eps();
  }
  const double prior_prec = 1.0 / prior.beta_cov_scale;
  xtx.diagonal().array() += prior_prec;
  xty += prior_prec * prior.beta_mean_or_zero(k);

  Eigen::LLT<Eigen::MatrixXd> llt(xtx);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(xtx, Eigen::EigenvaluesOnly);
    double cond = es.eigenvalues().maxCoeff() / std::abs(es.eigenvalues().minCoeff());
    throw NumericalError("update_beta: posterior precision is not positive definite", cond);
  }
  return {llt.solve(xty), std::move(xtx)};
}

Eigen::VectorXd update_beta(const ParameterState& state, const PanelDataset& data, const PriorConfig& prior,
                            RandomStream& rng) {
  auto cond = beta_conditional(state, data, prior);
  Eigen::LLT<Eigen::MatrixXd> llt(cond.precision);
  Eigen::VectorXd z(cond.mean.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
  return cond.mean + llt.matrixU().solve(z);
}

Eigen::MatrixXd update_u_plus(const ParameterState& state, const PanelDataset& data, RandomStream& rng) {
  const int t_len = data.n_periods();
  const auto cov = state.sigma();
  const auto prec = CompoundSymmetricPrecision::for_transient(cov, state.sigma2_u);
  Eigen::MatrixXd resid = linear_residual(state, data);
  Eigen::MatrixXd u = state.u_plus;
  for (int i = 0; i < data.n_regions(); ++i) {
    // tau_i = d + u_i+ with d = y - X b - v + eta+, so the canonical vector
    // of the u_i+ kernel is -Sigma^-1 d.
    Eigen::VectorXd d = resid.row(i).transpose().array() - state.v(i) + state.eta_plus(i);
    Eigen::VectorXd g = -cov.apply_inverse(d);
    double total = u.row(i).sum();
    for (int t = 0; t < t_len; ++t) {
      double others = total - u(i, t);
      auto c = prec.conditional(g(t), others);
      double draw = sample_truncated_normal({c.mean, c.variance, 0.0}, rng);
      total = others + draw;
      u(i, t) = draw;
    }
  }
  return u;
}

Eigen::VectorXd update_eta_plus(const ParameterState& state, const PanelDataset& data, RandomStream& rng) {
  const int t_len = data.n_periods();
  const auto cov = state.sigma();
  const double psi2 = state.sigma2_eta / (1.0 + state.sigma2_eta * cov.ones_quad());
  Eigen::MatrixXd resid = linear_residual(state, data);
  Eigen::VectorXd eta(data.n_regions());
  for (int i = 0; i < data.n_regions(); ++i) {
    // m_i = -psi2 * 1' Sigma^-1 (y - X b + u+ - v)
    double s = resid.row(i).sum() + state.u_plus.row(i).sum() - t_len * state.v(i);
    double m = -psi2 * cov.quad_from_sums(s, s, t_len);
    eta(i) = sample_truncated_normal({m, psi2, 0.0}, rng);
  }
  return eta;
}

Eigen::VectorXd update_v(const ParameterState& state, const PanelDataset& data, const SpatialGraph& graph,
                         bool center, RandomStream& rng) {
  const int t_len = data.n_periods();
  const auto cov = state.sigma();
  Eigen::MatrixXd resid = linear_residual(state, data);
  Eigen::VectorXd v = state.v;
  std::span<const double> vs(v.data(), static_cast<std::size_t>(v.size()));
  for (int i = 0; i < data.n_regions(); ++i) {
    double s = resid.row(i).sum() + state.u_plus.row(i).sum() + t_len * state.eta_plus(i);
    double var = 1.0 / (cov.ones_quad() + graph.row_sum(i) / state.sigma2_v);
    double mean = var * (cov.quad_from_sums(s, s, t_len) + graph.neighbor_sum(i, vs) / state.sigma2_v);
    v(i) = mean + std::sqrt(var) * rng.normal();
  }
  if (center) v.array() -= v.mean();
  return v;
}

double update_sigma2_v(const ParameterState& state, const SpatialGraph& graph, const PriorConfig& prior, CarDf df,
                       int n_periods, RandomStream& rng) {
  const int n = graph.n_regions();
  double q = car_quadratic_form(graph, {state.v.data(), static_cast<std::size_t>(state.v.size())});
  double dof = (df == CarDf::PanelCells ? double(n) * n_periods : double(n)) + prior.nbar_v;
  return (prior.qbar_v + q) / rng.chi_squared(dof);
}

double update_sigma2_u(const ParameterState& state, const PriorConfig& prior, RandomStream& rng) {
  const double cells = double(state.u_plus.size());
  double shape = 0.5 * (cells + prior.v0_u);
  double scale = 0.5 * (state.u_plus.squaredNorm() + 2.0 * prior.v0_u * log_sq(prior.r_star_u));
  return sample_inverse_gamma(shape, scale, rng);
}

double update_sigma2_eta(const ParameterState& state, const PriorConfig& prior, RandomStream& rng) {
  double shape = 0.5 * (double(state.eta_plus.size()) + prior.v0_eta);
  double scale = 0.5 * (state.eta_plus.squaredNorm() + 2.0 * prior.v0_eta * log_sq(prior.r_star_eta));
  return sample_inverse_gamma(shape, scale, rng);
}

double scaled_inv_chi2_log_density(double sigma2, double qbar, double nbar) {
  return -(0.5 * nbar + 1.0) * std::log(sigma2) - qbar / (2.0 * sigma2);
}

MhStep mh_variance_step(double current, const std::function<double(double)>& log_target, double step_scale,
                        RandomStream& rng) {
  const double log_m = std::log(kChiSquared1Median);
  double z = rng.chi_squared(1.0);
  double log_ratio = step_scale * (std::log(z) - log_m);
  double proposal = current * std::exp(log_ratio);
  if (!(proposal > 0.0) || !std::isfinite(proposal)) return {current, false};

  // Density of the log step l = s (log z - log m1), up to a constant:
  // 0.5 log z - z / 2 with z = m1 exp(l / s).
  auto log_step_density = [&](double l) {
    double lz = log_m + l / step_scale;
    return 0.5 * lz - 0.5 * std::exp(lz);
  };
  double log_hastings = log_step_density(-log_ratio) - log_step_density(log_ratio) + log_ratio;
  double log_accept = log_target(proposal) - log_target(current) + log_hastings;
  if (std::log(rng.uniform()) < log_accept) return {proposal, true};
  return {current, false};
}

MhResult update_sigma2_alpha_eps_mh(const ParameterState& state, const PanelDataset& data, const PriorConfig& prior,
                                    double step_scale_alpha, double step_scale_eps, RandomStream& rng) {
  const int n = data.n_regions(), t_len = data.n_periods();
  // tau = y - X b - v + eta+ + u+
  Eigen::MatrixXd e = linear_residual(state, data) + state.u_plus;
  e.colwise() += state.eta_plus - state.v;
  const double sum_sq = e.squaredNorm();
  const double sum_row_sq = e.rowwise().sum().squaredNorm();

  auto loglik = [&](double s2_alpha, double s2_eps) {
    CompoundSymmetricCov cov(s2_eps, s2_alpha, t_len);
    return -0.5 * (n * cov.log_det() + (sum_sq - cov.shrinkage() * sum_row_sq) / s2_eps);
  };

  MhResult out{state.sigma2_alpha, state.sigma2_eps, false, false};
  auto step_a = mh_variance_step(
      out.sigma2_alpha,
      [&](double a) { return loglik(a, out.sigma2_eps) + scaled_inv_chi2_log_density(a, prior.qbar_alpha, prior.nbar_alpha); },
      step_scale_alpha, rng);
  out.sigma2_alpha = step_a.value;
  out.accepted_alpha = step_a.accepted;

  auto step_e = mh_variance_step(
      out.sigma2_eps,
      [&](double s) { return loglik(out.sigma2_alpha, s) + scaled_inv_chi2_log_density(s, prior.qbar_eps, prior.nbar_eps); },
      step_scale_eps, rng);
  out.sigma2_eps = step_e.value;
  out.accepted_eps = step_e.accepted;
  return out;
}

ParameterState initial_state(const PanelDataset& data) {
  const int n = data.n_regions(), t = data.n_periods(), k = data.k_regressors();
  ParameterState st;
  Eigen::VectorXd yv(n * t);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < t; ++j) yv(i * t + j) = data.y(i, j);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(data.x.transpose() * data.x);
  st.beta = ldlt.info() == Eigen::Success ? Eigen::VectorXd(ldlt.solve(data.x.transpose() * yv)) : Eigen::VectorXd::Zero(k);
  if (!st.beta.allFinite()) st.beta.setZero();
  double s2 = (yv - data.x * st.beta).squaredNorm() / (n * t);
  double start = std::max(0.25 * s2, 1e-4);
  st.sigma2_alpha = st.sigma2_eps = st.sigma2_v = st.sigma2_u = st.sigma2_eta = start;
  st.u_plus = Eigen::MatrixXd::Constant(n, t, 0.8 * std::sqrt(start));
  st.eta_plus = Eigen::VectorXd::Constant(n, 0.8 * std::sqrt(start));
  st.v = Eigen::VectorXd::Zero(n);
  return st;
}

void gibbs_sweep(ParameterState& st, const PanelDataset& data, const SpatialGraph& graph, const PriorConfig& prior,
                 const ChainConfig& config, RandomStream& rng, ChainDiagnostics& diag) {
  const auto& fz = config.frozen;
  auto floor = [&](double x) {
    if (x < kVarianceFloor) {
      ++diag.floored;
      return kVarianceFloor;
    }
    return x;
  };

  if (!fz.beta) st.beta = update_beta(st, data, prior, rng);
  if (!fz.u_plus) st.u_plus = update_u_plus(st, data, rng);
  if (!fz.eta_plus) st.eta_plus = update_eta_plus(st, data, rng);
  if (!fz.v) st.v = update_v(st, data, graph, config.center_car, rng);
  if (!fz.sigma2_v) st.sigma2_v = floor(update_sigma2_v(st, graph, prior, config.car_df, data.n_periods(), rng));
  if (!fz.sigma2_u) st.sigma2_u = floor(update_sigma2_u(st, prior, rng));
  if (!fz.sigma2_eta) st.sigma2_eta = floor(update_sigma2_eta(st, prior, rng));
  if (!fz.sigma2_alpha || !fz.sigma2_eps) {
    auto mh = update_sigma2_alpha_eps_mh(st, data, prior, config.mh_step_scale_alpha, config.mh_step_scale_eps, rng);
    if (!fz.sigma2_alpha) {
      ++diag.proposals_alpha;
      diag.accepted_alpha += mh.accepted_alpha;
      st.sigma2_alpha = floor(mh.sigma2_alpha);
    }
    if (!fz.sigma2_eps) {
      ++diag.proposals_eps;
      diag.accepted_eps += mh.accepted_eps;
      st.sigma2_eps = floor(mh.sigma2_eps);
    }
  }
}

namespace {

PosteriorDraws allocate_draws(const PanelDataset& data, const SpatialGraph& graph, const ChainConfig& config, int n_chains) {
  const int s = config.n_stored() * n_chains;
  PosteriorDraws d;
  d.n_regions = data.n_regions();
  d.n_periods = data.n_periods();
  d.k_regressors = data.k_regressors();
  d.beta.resize(d.k_regressors, s);
  d.u_plus.resize(static_cast<Eigen::Index>(d.n_regions) * d.n_periods, s);
  d.eta_plus.resize(d.n_regions, s);
  d.v.resize(d.n_regions, s);
  d.variances.resize(5, s);
  d.chain.assign(static_cast<std::size_t>(s), 0);
  d.diagnostics.assign(static_cast<std::size_t>(n_chains), {});
  d.config = config;
  d.n_chains = n_chains;
  d.y_observed = data.y;
  d.average_row_sum = graph.average_row_sum();
  return d;
}

void store(PosteriorDraws& d, int col, const ParameterState& st) {
  d.beta.col(col) = st.beta;
  for (int i = 0; i < d.n_regions; ++i)
    for (int t = 0; t < d.n_periods; ++t) d.u_plus(i * d.n_periods + t, col) = st.u_plus(i, t);
  d.eta_plus.col(col) = st.eta_plus;
  d.v.col(col) = st.v;
  d.variances(PosteriorDraws::kAlpha, col) = st.sigma2_alpha;
  d.variances(PosteriorDraws::kEps, col) = st.sigma2_eps;
  d.variances(PosteriorDraws::kV, col) = st.sigma2_v;
  d.variances(PosteriorDraws::kU, col) = st.sigma2_u;
  d.variances(PosteriorDraws::kEta, col) = st.sigma2_eta;
}

void run_into(PosteriorDraws& d, int chain_index, const PanelDataset& data, const SpatialGraph& graph,
              const PriorConfig& prior, const ChainConfig& config, ParameterState st) {
  RandomStream rng = RandomStream(config.seed).split(static_cast<std::uint64_t>(chain_index));
  ChainDiagnostics diag;
  const int offset = chain_index * config.n_stored();
  for (int it = 1; it <= config.n_iter; ++it) {
    try {
      gibbs_sweep(st, data, graph, prior, config, rng, diag);
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << e.what() << " [chain " << chain_index << ", iteration " << it << "]";
      throw NumericalError(msg.str(), e.condition(), it);
    }
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      int col = offset + (it - config.burn_in) / config.thin - 1;
      store(d, col, st);
      d.chain[static_cast<std::size_t>(col)] = chain_index;
    }
  }
  d.diagnostics[static_cast<std::size_t>(chain_index)] = diag;
}

void check_inputs(const PanelDataset& data, const SpatialGraph& graph, const PriorConfig& prior,
                  const ChainConfig& config) {
  data.validate();
  prior.validate();
  config.validate();
  if (graph.n_regions() != data.n_regions())
    throw ValidationError("spatial graph has " + std::to_string(graph.n_regions()) + " regions but the panel has " +
                          std::to_string(data.n_regions()));
}

// Frozen blocks never move, so they may sit on the boundary (u+ = 0,
// sigma2_alpha = 0) as the conjugate oracle tests require.
void validate_start(ParameterState st, const PanelDataset& data, const FrozenBlocks& fz) {
  if (fz.u_plus && (st.u_plus.array() >= 0.0).all()) st.u_plus.setOnes(st.u_plus.rows(), st.u_plus.cols());
  if (fz.eta_plus && (st.eta_plus.array() >= 0.0).all()) st.eta_plus.setOnes(st.eta_plus.size());
  if (fz.sigma2_alpha && st.sigma2_alpha >= 0.0) st.sigma2_alpha = 1.0;
  if (fz.sigma2_v && st.sigma2_v >= 0.0) st.sigma2_v = 1.0;
  st.validate(data);
}

}  // namespace

PosteriorDraws run_chain(const PanelDataset& data, const SpatialGraph& graph, const PriorConfig& prior,
                         const ChainConfig& config, std::optional<ParameterState> start) {
  check_inputs(data, graph, prior, config);
  ParameterState st = start ? *start : initial_state(data);
  validate_start(st, data, config.frozen);
  PosteriorDraws d = allocate_draws(data, graph, config, 1);
  run_into(d, 0, data, graph, prior, config, std::move(st));
  return d;
}

PosteriorDraws run_chains(const PanelDataset& data, const SpatialGraph& graph, const PriorConfig& prior,
                          const ChainConfig& config, int n_chains) {
  if (n_chains < 1) throw ValidationError("need at least one chain");
  check_inputs(data, graph, prior, config);
  PosteriorDraws d = allocate_draws(data, graph, config, n_chains);
  const ParameterState start = initial_state(data);
  if (n_chains == 1) {
    run_into(d, 0, data, graph, prior, config, start);
    return d;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_chains));
  std::vector<std::thread> workers;
  for (int c = 0; c < n_chains; ++c)
    workers.emplace_back([&, c] {
      try {
        run_into(d, c, data, graph, prior, config, start);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    });
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return d;
}

}  // namespace hidpop
