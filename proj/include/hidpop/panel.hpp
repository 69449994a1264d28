#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <istream>
#include <ostream>

namespace hidpop {

// Balanced N x T panel on the log scale. Regressors are stacked by region:
// row i * T + t of `x` holds x_it'.
struct PanelDataset {
  Eigen::MatrixXd y;  // N x T
  Eigen::MatrixXd x;  // (N * T) x K

  int n_regions() const noexcept { return static_cast<int>(y.rows()); }
  int n_periods() const noexcept { return static_cast<int>(y.cols()); }
  int k_regressors() const noexcept { return static_cast<int>(x.cols()); }

  auto regressors(int region) const { return x.middleRows(static_cast<Eigen::Index>(region) * n_periods(), n_periods()); }

  // Throws ValidationError on shape mismatch or non-finite values.
  void validate() const;
};

// CSV with header `region,time,y,x1,...,xK`. Regions and periods are 0-based
// and contiguous; every (region, time) cell must appear exactly once.
PanelDataset read_panel_csv(std::istream& in);
PanelDataset read_panel_csv(const std::filesystem::path& path);
void write_panel_csv(std::ostream& out, const PanelDataset& data);

}  // namespace hidpop
