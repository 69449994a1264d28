#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace hidpop {

struct CountPanel {
  Eigen::MatrixXd s;  // N x T nonnegative integer counts
  Eigen::MatrixXd n;  // N x T positive populations

  void validate() const;
};

struct SirTable {
  Eigen::MatrixXd sir;         // s / E, NaN where E == 0
  Eigen::MatrixXd expected;    // E_it = n_it * sum_j s_jt / sum_j n_jt
  Eigen::MatrixXd exceedance;  // P(rate > 1 | s, E), NaN until computed
  double prior_nu = 0.01;
  double prior_alpha = 0.01;
  int undefined_cells = 0;
};

// Expected counts use internal standardization within each period.
SirTable compute_sir(const CountPanel& panel);

// 1 - F(1) for the Gamma posterior with shape s + nu and *rate* E + alpha.
double exceedance_probability(double s, double expected, double nu = 0.01, double alpha = 0.01);

// Fills table.exceedance from the counts.
void compute_exceedance(SirTable& table, const CountPanel& panel);

// "none" or the highest threshold label (e.g. "95") the exceedance reaches;
// thresholds are inclusive.
std::vector<std::vector<std::string>> flag_hotspots(const SirTable& table,
                                                    const std::vector<double>& thresholds = {0.90, 0.95, 0.99});
std::string tier_label(double exceedance, const std::vector<double>& thresholds);

// `region,time,count,population`, 0-based contiguous ids.
CountPanel read_count_csv(std::istream& in);
CountPanel read_count_csv(const std::filesystem::path& path);
// `region,time,sir,expected,exceedance,tier`
void write_sir_csv(std::ostream& out, const SirTable& table, const std::vector<std::vector<std::string>>& tiers);

}  // namespace hidpop
