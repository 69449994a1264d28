#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hidpop/panel.hpp"
#include "hidpop/random_stream.hpp"
#include "hidpop/spatial_graph.hpp"
#include "hidpop/stats_kernels.hpp"

namespace hidpop {

// One full draw of the augmented parameter vector. alpha_i is integrated out
// through Sigma and is never part of the state.
struct ParameterState {
  Eigen::VectorXd beta;      // K
  Eigen::MatrixXd u_plus;    // N x T, > 0
  Eigen::VectorXd eta_plus;  // N, > 0
  Eigen::VectorXd v;         // N
  double sigma2_alpha = 0.01;
  double sigma2_eps = 0.01;
  double sigma2_v = 0.1;
  double sigma2_u = 0.04;
  double sigma2_eta = 0.25;

  CompoundSymmetricCov sigma() const { return {sigma2_eps, sigma2_alpha, static_cast<int>(u_plus.cols())}; }

  // Throws ValidationError if a one-sided error or variance is not positive,
  // or shapes disagree with `data`.
  void validate(const PanelDataset& data) const;
};

struct PriorConfig {
  Eigen::VectorXd beta_mean;    // empty means zero of length K
  double beta_cov_scale = 1000.0;  // B0 = scale * I
  double qbar_eps = 1e-4, qbar_alpha = 1e-4, qbar_v = 1e-4;
  double nbar_eps = 1.0, nbar_alpha = 1.0, nbar_v = 1.0;
  double v0_u = 10.0, v0_eta = 10.0;
  double r_star_u = 0.85, r_star_eta = 0.70;

  void validate() const;
  Eigen::VectorXd beta_mean_or_zero(int k) const;
};

// Degrees of freedom of the chi-squared law for (Qbar_v + v'(D-W)v) / sigma2_v.
enum class CarDf {
  PanelCells,  // N * T + Nbar_v, as the conditional is printed
  Regions,     // N + Nbar_v
};

// Blocks held at their initial value. Diagnostics and oracle tests only.
struct FrozenBlocks {
  bool beta = false, u_plus = false, eta_plus = false, v = false;
  bool sigma2_v = false, sigma2_u = false, sigma2_eta = false, sigma2_alpha = false, sigma2_eps = false;
};

struct ChainConfig {
  int n_iter = 20000;
  int burn_in = 10000;
  int thin = 5;
  std::uint64_t seed = 1;
  // Exponent s of the multiplicative proposal sigma2' = sigma2 * (z / m1)^s,
  // z ~ chi2(1), m1 its median. s = 1 is the plain scaled chi2(1) proposal.
  double mh_step_scale_alpha = 0.5;
  double mh_step_scale_eps = 0.1;
  bool center_car = false;
  CarDf car_df = CarDf::PanelCells;
  FrozenBlocks frozen;

  void validate() const;
  int n_stored() const noexcept { return (n_iter - burn_in) / thin; }
};

inline constexpr double kVarianceFloor = 1e-12;
inline constexpr double kChiSquared1Median = 0.45493642311957283;

struct ChainDiagnostics {
  long proposals_alpha = 0, accepted_alpha = 0;
  long proposals_eps = 0, accepted_eps = 0;
  long floored = 0;

  double acceptance_alpha() const { return proposals_alpha ? double(accepted_alpha) / proposals_alpha : 0.0; }
  double acceptance_eps() const { return proposals_eps ? double(accepted_eps) / proposals_eps : 0.0; }
};

// Thinned post-burn-in draws. Each stored draw is one column.
struct PosteriorDraws {
  int n_regions = 0, n_periods = 0, k_regressors = 0;
  Eigen::MatrixXd beta;       // K x S
  Eigen::MatrixXd u_plus;     // (N * T) x S, row i * T + t
  Eigen::MatrixXd eta_plus;   // N x S
  Eigen::MatrixXd v;          // N x S
  Eigen::MatrixXd variances;  // 5 x S: alpha, eps, v, u, eta
  std::vector<int> chain;     // chain index of each draw
  std::vector<ChainDiagnostics> diagnostics;  // per chain
  ChainConfig config;
  int n_chains = 1;
  Eigen::MatrixXd y_observed;  // N x T, log scale
  double average_row_sum = 0.0;

  enum Variance : int { kAlpha = 0, kEps = 1, kV = 2, kU = 3, kEta = 4 };

  int n_draws() const noexcept { return static_cast<int>(beta.cols()); }
  ParameterState state(int s) const;
};

// --- single-block updates, in sweep order ---------------------------------

// Full conditional N(mean, precision^-1) of beta.
struct BetaConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
};

BetaConditional beta_conditional(const ParameterState& state, const PanelDataset& data, const PriorConfig& prior);

Eigen::VectorXd update_beta(const ParameterState& state, const PanelDataset& data, const PriorConfig& prior,
                            RandomStream& rng);
Eigen::MatrixXd update_u_plus(const ParameterState& state, const PanelDataset& data, RandomStream& rng);
Eigen::VectorXd update_eta_plus(const ParameterState& state, const PanelDataset& data, RandomStream& rng);
// Sequential over regions; each region sees the latest neighbour values.
Eigen::VectorXd update_v(const ParameterState& state, const PanelDataset& data, const SpatialGraph& graph,
                         bool center, RandomStream& rng);
double update_sigma2_v(const ParameterState& state, const SpatialGraph& graph, const PriorConfig& prior, CarDf df,
                       int n_periods, RandomStream& rng);
double update_sigma2_u(const ParameterState& state, const PriorConfig& prior, RandomStream& rng);
double update_sigma2_eta(const ParameterState& state, const PriorConfig& prior, RandomStream& rng);

struct MhResult {
  double sigma2_alpha;
  double sigma2_eps;
  bool accepted_alpha;
  bool accepted_eps;
};

MhResult update_sigma2_alpha_eps_mh(const ParameterState& state, const PanelDataset& data, const PriorConfig& prior,
                                    double step_scale_alpha, double step_scale_eps, RandomStream& rng);

struct MhStep {
  double value;
  bool accepted;
};

// One Metropolis-Hastings move for a positive scalar under the multiplicative
// median-centred chi2(1) proposal, with the Hastings correction for its
// asymmetry. `log_target` is the unnormalised log density.
MhStep mh_variance_step(double current, const std::function<double(double)>& log_target, double step_scale,
                        RandomStream& rng);

// Log density (up to a constant) of sigma2 under Qbar / sigma2 ~ chi2(Nbar).
double scaled_inv_chi2_log_density(double sigma2, double qbar, double nbar);

// --- chains -----------------------------------------------------------------

// Data-driven starting point: OLS beta, moderate variances.
ParameterState initial_state(const PanelDataset& data);

// One sweep: beta, u+, eta+, v, sigma2_v, sigma2_u, sigma2_eta, then the
// (sigma2_alpha, sigma2_eps) MH pair. Frozen blocks are skipped.
void gibbs_sweep(ParameterState& state, const PanelDataset& data, const SpatialGraph& graph, const PriorConfig& prior,
                 const ChainConfig& config, RandomStream& rng, ChainDiagnostics& diag);

// Single chain seeded from RandomStream(config.seed).split(0).
PosteriorDraws run_chain(const PanelDataset& data, const SpatialGraph& graph, const PriorConfig& prior,
                         const ChainConfig& config, std::optional<ParameterState> start = std::nullopt);

// `n_chains` chains in parallel; chain c uses RandomStream(config.seed).split(c)
// and draws are concatenated in chain order.
PosteriorDraws run_chains(const PanelDataset& data, const SpatialGraph& graph, const PriorConfig& prior,
                          const ChainConfig& config, int n_chains);

}  // namespace hidpop
