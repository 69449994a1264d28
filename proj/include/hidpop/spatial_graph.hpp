#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace hidpop {

struct Neighbor {
  int index;
  double weight;
};

// Symmetric contiguity structure with zero diagonal. Every region has at
// least one neighbour, so the intrinsic CAR conditional variance
// sigma2_v / row_sum(i) is finite. Immutable once built.
class SpatialGraph {
public:
  SpatialGraph() = default;

  // Validates symmetry, zero diagonal and minimum degree; throws
  // ValidationError otherwise.
  explicit SpatialGraph(std::vector<std::vector<Neighbor>> adjacency);

  int n_regions() const noexcept { return static_cast<int>(adjacency_.size()); }
  std::span<const Neighbor> neighbors(int i) const { return adjacency_.at(static_cast<std::size_t>(i)); }
  double row_sum(int i) const { return row_sums_.at(static_cast<std::size_t>(i)); }
  const std::vector<double>& row_sums() const noexcept { return row_sums_; }
  double average_row_sum() const noexcept { return average_row_sum_; }
  std::size_t n_edges() const noexcept { return n_edges_; }

  // sum_j w_ij x_j
  double neighbor_sum(int i, std::span<const double> x) const;

  // Dense D_w - W. Test oracles and simulation only.
  Eigen::MatrixXd car_precision_dense() const;

  // Same graph with region i relabelled as perm[i].
  SpatialGraph permuted(std::span<const int> perm) const;

private:
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<double> row_sums_;
  double average_row_sum_ = 0.0;
  std::size_t n_edges_ = 0;
};

// Normalised neighbour weights w_ij / sum_j w_ij and row sums: the intrinsic
// CAR full conditional v_i | v_-i ~ N(sum_j w~_ij v_j, sigma2_v / row_sum_i).
struct CarConditional {
  std::vector<std::vector<Neighbor>> normalized;
  std::vector<double> row_sum;

  explicit CarConditional(const SpatialGraph& graph);

  double mean(int i, std::span<const double> v) const;
  double variance(int i, double sigma2_v) const { return sigma2_v / row_sum.at(static_cast<std::size_t>(i)); }
};

// Queen contiguity on a rows x cols lattice; cell (r, c) has index r * cols + c.
SpatialGraph build_queen_grid(int rows, int cols);

// Edge list: one `i j [weight]` per line, 0-based, '#' starts a comment.
// An optional `regions N` line fixes the region count; otherwise it is
// max index + 1. Each undirected edge may appear once, or twice as (i j) and
// (j i) with equal weight.
SpatialGraph load_adjacency(std::istream& in);
SpatialGraph load_adjacency(const std::filesystem::path& path);
// Writes the `regions N` line and each undirected edge once (i < j).
void write_adjacency(std::ostream& out, const SpatialGraph& graph);

// v' (D_w - W) v evaluated pairwise: sum_{i<j} w_ij (v_i - v_j)^2.
double car_quadratic_form(const SpatialGraph& graph, std::span<const double> v);

// sigma_v / (0.7 * average row sum)
double marginal_spatial_sd(double sigma_v, const SpatialGraph& graph);
double marginal_spatial_sd(double sigma_v, double average_row_sum);

}  // namespace hidpop
