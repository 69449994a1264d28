#include "hidpop/stats_kernels.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hidpop/errors.hpp"

namespace hidpop {

namespace {

constexpr double kTailSwitch = 4.0;

// Standard normal restricted to (alpha, inf) with alpha > 0 large.
double robert_tail(double alpha, RandomStream& rng) {
  const double rate = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
  for (;;) {
    double z = alpha - std::log(rng.uniform()) / rate;
    double d = z - rate;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return z;
  }
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double sample_truncated_normal(const TruncatedNormalSpec& spec, RandomStream& rng) {
  if (!std::isfinite(spec.mean) || !std::isfinite(spec.variance) || !std::isfinite(spec.lower_bound))
    throw std::invalid_argument("sample_truncated_normal: non-finite parameter");
  if (spec.variance <= 0.0) throw std::invalid_argument("sample_truncated_normal: variance must be positive");

  const double sd = std::sqrt(spec.variance);
  const double alpha = (spec.lower_bound - spec.mean) / sd;

  for (;;) {
    double z;
    if (alpha > kTailSwitch) {
      z = robert_tail(alpha, rng);
    } else {
      // Invert through the upper tail so that moderate positive bounds keep
      // full relative precision.
      double upper_mass = normal_cdf(-alpha);
      z = -normal_quantile(rng.uniform() * upper_mass);
    }
    double x = spec.mean + sd * z;
    if (x > spec.lower_bound) return x;
  }
}

double sample_inverse_gamma(double shape, double scale, RandomStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw std::invalid_argument("sample_inverse_gamma: shape and scale must be positive");
  return scale / rng.gamma(shape);
}

CompoundSymmetricCov::CompoundSymmetricCov(double sigma2_eps, double sigma2_alpha, int t_len)
    : sigma2_eps_(sigma2_eps), sigma2_alpha_(sigma2_alpha), t_len_(t_len) {
  if (!(sigma2_eps > 0.0)) throw std::invalid_argument("CompoundSymmetricCov: sigma2_eps must be positive");
  if (!(sigma2_alpha >= 0.0)) throw std::invalid_argument("CompoundSymmetricCov: sigma2_alpha must be >= 0");
  if (t_len < 1) throw std::invalid_argument("CompoundSymmetricCov: t_len must be >= 1");
  const double total = sigma2_eps + t_len * sigma2_alpha;
  shrink_ = sigma2_alpha / total;
  log_det_ = (t_len - 1) * std::log(sigma2_eps) + std::log(total);
  ones_quad_ = t_len / total;
}

Eigen::VectorXd CompoundSymmetricCov::apply_inverse(const Eigen::VectorXd& x) const {
  return (x.array() - shrink_ * x.sum()).matrix() / sigma2_eps_;
}

Eigen::MatrixXd CompoundSymmetricCov::dense() const {
  return sigma2_eps_ * Eigen::MatrixXd::Identity(t_len_, t_len_) +
         sigma2_alpha_ * Eigen::MatrixXd::Ones(t_len_, t_len_);
}

Eigen::MatrixXd sigma_inverse(const CompoundSymmetricCov& cov) {
  const int t = cov.t_len();
  return (Eigen::MatrixXd::Identity(t, t) - cov.shrinkage() * Eigen::MatrixXd::Ones(t, t)) / cov.sigma2_eps();
}

ConditionalNormal conditional_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int index,
                                  const Eigen::VectorXd& others) {
  const int t = static_cast<int>(mean.size());
  if (cov.rows() != t || cov.cols() != t) throw std::invalid_argument("conditional_mvn: covariance shape mismatch");
  if (index < 0 || index >= t) throw std::invalid_argument("conditional_mvn: index out of range");
  if (others.size() != t - 1) throw std::invalid_argument("conditional_mvn: `others` must have length T-1");
  if (t == 1) return {mean(0), cov(0, 0)};

  Eigen::VectorXi keep(t - 1);
  for (int j = 0, k = 0; j < t; ++j)
    if (j != index) keep(k++) = j;

  Eigen::MatrixXd omega22 = cov(keep, keep);
  Eigen::RowVectorXd omega12 = cov(Eigen::seqN(index, 1), keep);
  Eigen::VectorXd mu2 = mean(keep);

  Eigen::LLT<Eigen::MatrixXd> llt(omega22);
  double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (!(rcond > 1e-14)) {
    std::ostringstream msg;
    msg << "conditional_mvn: conditioning block is singular (reciprocal condition " << rcond << ")";
    throw NumericalError(msg.str(), rcond > 0.0 ? 1.0 / rcond : INFINITY);
  }
  Eigen::VectorXd w = llt.solve(omega12.transpose());
  return {mean(index) + w.dot(others - mu2), cov(index, index) - omega12.dot(w)};
}

CompoundSymmetricPrecision::CompoundSymmetricPrecision(double a, double b, int t_len) : a_(a), b_(b), t_len_(t_len) {
  if (t_len < 1) throw std::invalid_argument("CompoundSymmetricPrecision: t_len must be >= 1");
  if (!(a - b > 0.0) || !(a - t_len * b > 0.0))
    throw std::invalid_argument("CompoundSymmetricPrecision: precision is not positive definite");
}

CompoundSymmetricPrecision CompoundSymmetricPrecision::for_transient(const CompoundSymmetricCov& cov, double sigma2_u) {
  return {1.0 / cov.sigma2_eps() + 1.0 / sigma2_u, cov.shrinkage() / cov.sigma2_eps(), cov.t_len()};
}

Eigen::MatrixXd CompoundSymmetricPrecision::covariance() const {
  const int t = t_len_;
  double k = b_ / (a_ - t * b_);
  return (Eigen::MatrixXd::Identity(t, t) + k * Eigen::MatrixXd::Ones(t, t)) / a_;
}

Eigen::VectorXd CompoundSymmetricPrecision::mean(const Eigen::VectorXd& g) const {
  double k = b_ / (a_ - t_len_ * b_);
  return (g.array() + k * g.sum()).matrix() / a_;
}

}  // namespace hidpop
