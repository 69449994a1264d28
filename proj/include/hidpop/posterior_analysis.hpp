#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "hidpop/gibbs_sampler.hpp"
#include "hidpop/random_stream.hpp"

namespace hidpop {

struct Interval {
  double lower;
  double upper;
};

// Empirical highest density interval: the shortest window over the sorted
// draws spanning ceil(level * S) index steps, i.e. holding at least
// level * S points. Ties go to the smallest lower endpoint. Needs S >= 100.
Interval hdi(std::span<const double> draws, double level);

struct HiddenPopulationInterval {
  int region = 0;
  int time = 0;
  double point_estimate = 0.0;  // posterior mean of Y * exp(eta+ + u+)
  double hdi_lower = 0.0;
  double hdi_upper = 0.0;
  double level = 0.95;
};

// `y_level` is the observed outcome on the level scale (exp of the panel y).
HiddenPopulationInterval hidden_population_interval(const PosteriorDraws& draws, const Eigen::MatrixXd& y_level,
                                                    int region, int time, double level);
std::vector<HiddenPopulationInterval> hidden_population_intervals(const PosteriorDraws& draws,
                                                                  const Eigen::MatrixXd& y_level, double level);

// Beta-Binomial coverage of the hidden-population intervals: uniform prior,
// a = 1 + hits, b = 1 + cells - hits, summarised from n_beta_draws draws.
struct CoverageReport {
  double nominal_level = 0.0;
  double posterior_mean_coverage = 0.0;
  Interval coverage_hdi{0.0, 0.0};
  double a = 1.0;
  double b = 1.0;
  int hits = 0;
  int cells = 0;
};

CoverageReport coverage_report(const std::vector<HiddenPopulationInterval>& intervals, const Eigen::MatrixXd& true_P,
                               double level, int n_beta_draws, RandomStream& rng);

enum class MapeMode {
  PointEstimate,  // |P - E[P]| / P
  PerDraw,        // mean over draws of |P - P^(s)| / P
};

struct MapeSummary {
  double average = 0.0;
  double median = 0.0;
  Interval hdi{0.0, 0.0};  // 95% over cells
  int excluded = 0;        // cells with zero true P
  Eigen::MatrixXd per_cell;  // N x T, NaN where excluded
};

MapeSummary mape_summary(const PosteriorDraws& draws, const Eigen::MatrixXd& y_level, const Eigen::MatrixXd& true_P,
                         MapeMode mode = MapeMode::PointEstimate);

// Average over draws (columns of `draws`) of the Pearson correlation between
// the drawn vector and `truth`.
double rho_hat(const Eigen::MatrixXd& draws, const Eigen::VectorXd& truth);

struct UncapturedSummary {
  double permanent_pct = 0.0;  // E[1 - exp(-eta+)]
  double total_pct = 0.0;      // E[1 - exp(-(eta+ + u+))]
  double lambda_stat = 0.0;    // E[(sigma_eta + sigma_u) / sigma_eps]
  double spatial_share = 0.0;  // E[d / (d + sigma_alpha + sigma_eps + sigma_eta + sigma_u)], d the marginal spatial sd
};

UncapturedSummary uncaptured_summaries(const PosteriorDraws& draws);

// Posterior mean of 1 - exp(-eta_i+) (column 0 broadcast over time) and of
// 1 - exp(-(eta_i+ + u_it+)), each N x T.
struct UncapturedCells {
  Eigen::MatrixXd permanent;
  Eigen::MatrixXd total;
};
UncapturedCells uncaptured_by_cell(const PosteriorDraws& draws);

struct ParameterSummary {
  std::string name;
  double mean;
  double median;
  double hdi_lower;
  double hdi_upper;
};

// beta_k, the five standard deviations, lambda (HDIs at `level`), plus
// cross-component mean/median of the posterior means of -eta+, -u+ and v
// (HDI columns NaN for those, and for every row when there are fewer than
// 100 draws).
std::vector<ParameterSummary> summarize_parameters(const PosteriorDraws& draws, double level = 0.95);

double median(std::vector<double> values);

}  // namespace hidpop
