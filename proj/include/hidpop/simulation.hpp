#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>

#include "hidpop/panel.hpp"
#include "hidpop/spatial_graph.hpp"

namespace hidpop {

enum class ErrorLaw { Normal, StudentT };

// Monte Carlo design on a queen lattice:
//   y_it = b_z z_it + b_lag sum_j w_ij z_jt + alpha_i + v_i - eta_i+ - u_it+ + eps_it
// with z_it ~ N(0, 1). Under StudentT, eps_it = sigma_eps * t(df).
struct DgpConfig {
  int rows = 7;
  int cols = 7;
  int periods = 5;
  Eigen::Vector2d beta_true{0.5, -0.5};
  double sigma_alpha = 0.1;
  double sigma_eta = 0.5;
  double sigma_u = 0.2;
  double sigma_eps = 0.1;
  double sigma_v = 0.4;
  ErrorLaw eps_law = ErrorLaw::Normal;
  double t_df = 4.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SimulatedTruth {
  PanelDataset dataset;
  Eigen::MatrixXd true_u_plus;    // N x T
  Eigen::VectorXd true_eta_plus;  // N
  Eigen::VectorXd true_v;         // N, sums to zero
  Eigen::VectorXd true_alpha;     // N
  Eigen::MatrixXd true_eps;       // N x T
  Eigen::MatrixXd true_P;         // N x T, level scale: exp(x'b + alpha + v + eps)
};

// The intrinsic CAR field is drawn from the proper Gaussian on the
// complement of the constant vector with precision (D_w - W) / sigma_v^2.
SimulatedTruth simulate(const DgpConfig& config);
SimulatedTruth simulate(const DgpConfig& config, const SpatialGraph& graph);

// (sigma_eta + sigma_u) / sigma_eps
double lambda_of(const DgpConfig& config);
// Same design with sigma_eps rescaled so lambda_of() == target_lambda.
DgpConfig make_lambda_scenario(double target_lambda, const DgpConfig& base);

// Latent components read back from the truth sidecar.
struct TruthTable {
  Eigen::MatrixXd u_plus;
  Eigen::VectorXd eta_plus;
  Eigen::VectorXd v;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd P;
};

// `region,time,u_plus,eta_plus,v,alpha,P`
void write_truth_csv(std::ostream& out, const SimulatedTruth& truth);
TruthTable read_truth_csv(std::istream& in);
TruthTable read_truth_csv(const std::filesystem::path& path);
TruthTable truth_table(const SimulatedTruth& truth);

}  // namespace hidpop
