#pragma once

#include <Eigen/Dense>

#include "hidpop/random_stream.hpp"

namespace hidpop {

double normal_cdf(double x);
double normal_quantile(double p);

struct TruncatedNormalSpec {
  double mean = 0.0;
  double variance = 1.0;
  double lower_bound = 0.0;
};

// Draw from N(mean, variance) restricted to (lower_bound, inf). Inverse-CDF
// when the standardised bound is <= 4, Robert's exponential rejection above.
double sample_truncated_normal(const TruncatedNormalSpec& spec, RandomStream& rng);

// X with density proportional to x^(-shape-1) exp(-scale/x).
double sample_inverse_gamma(double shape, double scale, RandomStream& rng);

// Sigma = sigma2_eps * I_T + sigma2_alpha * 1 1'. Never materialised in the
// sampler; products go through the rank-one closed form
//   Sigma^-1 = (1/sigma2_eps) (I - c 1 1'),  c = sigma2_alpha / (sigma2_eps + T sigma2_alpha).
class CompoundSymmetricCov {
public:
  CompoundSymmetricCov(double sigma2_eps, double sigma2_alpha, int t_len);

  double sigma2_eps() const noexcept { return sigma2_eps_; }
  double sigma2_alpha() const noexcept { return sigma2_alpha_; }
  int t_len() const noexcept { return t_len_; }

  // c in the closed form above.
  double shrinkage() const noexcept { return shrink_; }
  double log_det() const noexcept { return log_det_; }
  // 1' Sigma^-1 1 = T / (sigma2_eps + T sigma2_alpha)
  double ones_quad() const noexcept { return ones_quad_; }

  // x' Sigma^-1 y given x.y, sum(x), sum(y).
  double quad_from_sums(double dot, double sum_x, double sum_y) const noexcept {
    return (dot - shrink_ * sum_x * sum_y) / sigma2_eps_;
  }

  template <class Vec>
  double quad(const Vec& x, const Vec& y) const {
    return quad_from_sums(x.dot(y), x.sum(), y.sum());
  }

  // Sigma^-1 x
  Eigen::VectorXd apply_inverse(const Eigen::VectorXd& x) const;

  Eigen::MatrixXd dense() const;

private:
  double sigma2_eps_;
  double sigma2_alpha_;
  int t_len_;
  double shrink_;
  double log_det_;
  double ones_quad_;
};

Eigen::MatrixXd sigma_inverse(const CompoundSymmetricCov& cov);

struct ConditionalNormal {
  double mean;
  double variance;
};

// Law of component `index` of N(mean, cov) given the remaining components
// (in their original order, `index` removed) equal `others`.
ConditionalNormal conditional_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int index,
                                  const Eigen::VectorXd& others);

// Gaussian parameterised by precision Q = a I - b 1 1' and canonical vector
// g = Q mu. This is the shape of the u+ block conditional, where
// a = 1/sigma2_eps + 1/sigma2_u and b = c / sigma2_eps.
class CompoundSymmetricPrecision {
public:
  CompoundSymmetricPrecision(double a, double b, int t_len);

  static CompoundSymmetricPrecision for_transient(const CompoundSymmetricCov& cov, double sigma2_u);

  // Full conditional of one coordinate given the canonical entry g_t and the
  // sum of the other coordinates. Same result as conditional_mvn on the
  // implied (mean, covariance), in O(1).
  ConditionalNormal conditional(double g_t, double sum_others) const noexcept {
    double q = a_ - b_;
    return {(g_t + b_ * sum_others) / q, 1.0 / q};
  }

  Eigen::MatrixXd covariance() const;
  Eigen::VectorXd mean(const Eigen::VectorXd& g) const;

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }

private:
  double a_;
  double b_;
  int t_len_;
};

}  // namespace hidpop
