#include "hidpop/spatial_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "hidpop/errors.hpp"

namespace hidpop {

SpatialGraph::SpatialGraph(std::vector<std::vector<Neighbor>> adjacency) : adjacency_(std::move(adjacency)) {
  const int n = n_regions();
  if (n < 2) throw ValidationError("SpatialGraph: need at least two regions");

  std::map<std::pair<int, int>, double> weight;
  for (int i = 0; i < n; ++i) {
    for (const auto& nb : adjacency_[static_cast<std::size_t>(i)]) {
      if (nb.index < 0 || nb.index >= n)
        throw ValidationError("SpatialGraph: neighbour index " + std::to_string(nb.index) + " out of range");
      if (nb.index == i) throw ValidationError("SpatialGraph: self-loop at region " + std::to_string(i));
      // Nonnegative symmetric weights make D_w - W a weighted graph
      // Laplacian, hence positive semidefinite.
      if (!(nb.weight > 0.0) || !std::isfinite(nb.weight))
        throw ValidationError("SpatialGraph: weights must be positive and finite (region " + std::to_string(i) + ")");
      if (!weight.emplace(std::make_pair(i, nb.index), nb.weight).second)
        throw ValidationError("SpatialGraph: duplicate neighbour " + std::to_string(nb.index) + " of region " +
                              std::to_string(i));
    }
  }
  for (const auto& [key, w] : weight) {
    auto it = weight.find({key.second, key.first});
    if (it == weight.end() || it->second != w)
      throw ValidationError("SpatialGraph: asymmetric entry between regions " + std::to_string(key.first) + " and " +
                            std::to_string(key.second));
  }

  row_sums_.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<int> isolated;
  for (int i = 0; i < n; ++i) {
    auto& list = adjacency_[static_cast<std::size_t>(i)];
    std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
    for (const auto& nb : list) row_sums_[static_cast<std::size_t>(i)] += nb.weight;
    if (list.empty()) isolated.push_back(i);
  }
  if (!isolated.empty()) {
    std::ostringstream msg;
    msg << "SpatialGraph: isolated region(s):";
    for (int i : isolated) msg << ' ' << i;
    throw ValidationError(msg.str());
  }
  n_edges_ = weight.size() / 2;
  double total = 0.0;
  for (double r : row_sums_) total += r;
  average_row_sum_ = total / n;
}

double SpatialGraph::neighbor_sum(int i, std::span<const double> x) const {
  double s = 0.0;
  for (const auto& nb : neighbors(i)) s += nb.weight * x[static_cast<std::size_t>(nb.index)];
  return s;
}

Eigen::MatrixXd SpatialGraph::car_precision_dense() const {
  const int n = n_regions();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    q(i, i) = row_sum(i);
    for (const auto& nb : neighbors(i)) q(i, nb.index) -= nb.weight;
  }
  return q;
}

SpatialGraph SpatialGraph::permuted(std::span<const int> perm) const {
  const auto n = static_cast<std::size_t>(n_regions());
  if (perm.size() != n) throw std::invalid_argument("SpatialGraph::permuted: permutation length mismatch");
  std::vector<std::vector<Neighbor>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& nb : adjacency_[i])
      adj[static_cast<std::size_t>(perm[i])].push_back({perm[static_cast<std::size_t>(nb.index)], nb.weight});
  return SpatialGraph(std::move(adj));
}

CarConditional::CarConditional(const SpatialGraph& graph) : row_sum(graph.row_sums()) {
  normalized.resize(static_cast<std::size_t>(graph.n_regions()));
  for (int i = 0; i < graph.n_regions(); ++i)
    for (const auto& nb : graph.neighbors(i))
      normalized[static_cast<std::size_t>(i)].push_back({nb.index, nb.weight / graph.row_sum(i)});
}

double CarConditional::mean(int i, std::span<const double> v) const {
  double s = 0.0;
  for (const auto& nb : normalized.at(static_cast<std::size_t>(i))) s += nb.weight * v[static_cast<std::size_t>(nb.index)];
  return s;
}

SpatialGraph build_queen_grid(int rows, int cols) {
  if (rows < 1 || cols < 1 || rows * cols < 2)
    throw std::invalid_argument("build_queen_grid: need rows, cols >= 1 and rows * cols >= 2");
  std::vector<std::vector<Neighbor>> adj(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
          adj[static_cast<std::size_t>(r * cols + c)].push_back({rr * cols + cc, 1.0});
        }
  return SpatialGraph(std::move(adj));
}

SpatialGraph load_adjacency(std::istream& in) {
  struct Entry {
    double weight;
    std::size_t line;
    int from;
    bool mirrored = false;
  };
  std::map<std::pair<int, int>, Entry> edges;  // keyed (min, max)
  int declared = -1;
  int max_index = -1;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first)) continue;
    if (first == "regions") {
      if (!(ss >> declared) || declared < 2) throw FormatError("malformed `regions` directive", line_no);
      continue;
    }
    int i = 0, j = 0;
    double w = 1.0;
    try {
      std::size_t pos = 0;
      i = std::stoi(first, &pos);
      if (pos != first.size()) throw std::invalid_argument(first);
    } catch (const std::exception&) {
      throw FormatError("expected `i j [weight]`", line_no);
    }
    if (!(ss >> j)) throw FormatError("expected `i j [weight]`", line_no);
    if (!(ss >> w)) {
      if (!ss.eof()) throw FormatError("malformed weight", line_no);
      w = 1.0;
    }
    std::string extra;
    ss.clear();
    if (ss >> extra) throw FormatError("trailing tokens", line_no);
    if (i < 0 || j < 0) throw FormatError("negative region index", line_no);
    if (i == j) throw FormatError("self-loop on region " + std::to_string(i), line_no);
    if (!(w > 0.0) || !std::isfinite(w)) throw FormatError("weight must be positive and finite", line_no);

    auto key = std::make_pair(std::min(i, j), std::max(i, j));
    auto it = edges.find(key);
    if (it == edges.end()) {
      edges.emplace(key, Entry{w, line_no, i});
    } else if (it->second.mirrored || it->second.from == i) {
      throw FormatError("duplicate edge " + std::to_string(i) + " " + std::to_string(j), line_no);
    } else if (it->second.weight != w) {
      throw FormatError("asymmetric weight for edge " + std::to_string(i) + " " + std::to_string(j) +
                            " (first seen on line " + std::to_string(it->second.line) + ")",
                        line_no);
    } else {
      it->second.mirrored = true;
    }
    max_index = std::max({max_index, i, j});
  }

  int n = declared >= 0 ? declared : max_index + 1;
  if (max_index >= n) throw FormatError("region index " + std::to_string(max_index) + " exceeds declared count");
  std::vector<std::vector<Neighbor>> adj(static_cast<std::size_t>(std::max(n, 0)));
  for (const auto& [key, e] : edges) {
    adj[static_cast<std::size_t>(key.first)].push_back({key.second, e.weight});
    adj[static_cast<std::size_t>(key.second)].push_back({key.first, e.weight});
  }
  return SpatialGraph(std::move(adj));
}

SpatialGraph load_adjacency(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open adjacency file " + path.string());
  return load_adjacency(in);
}

void write_adjacency(std::ostream& out, const SpatialGraph& graph) {
  out << "regions " << graph.n_regions() << '\n' << std::setprecision(17);
  for (int i = 0; i < graph.n_regions(); ++i)
    for (const auto& nb : graph.neighbors(i))
      if (i < nb.index) out << i << ' ' << nb.index << ' ' << nb.weight << '\n';
}

double car_quadratic_form(const SpatialGraph& graph, std::span<const double> v) {
  if (v.size() != static_cast<std::size_t>(graph.n_regions()))
    throw std::invalid_argument("car_quadratic_form: vector length does not match region count");
  double q = 0.0;
  for (int i = 0; i < graph.n_regions(); ++i)
    for (const auto& nb : graph.neighbors(i))
      if (nb.index > i) {
        double d = v[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(nb.index)];
        q += nb.weight * d * d;
      }
  return q;
}

double marginal_spatial_sd(double sigma_v, const SpatialGraph& graph) {
  return marginal_spatial_sd(sigma_v, graph.average_row_sum());
}

double marginal_spatial_sd(double sigma_v, double average_row_sum) {
  if (!(sigma_v > 0.0)) throw std::invalid_argument("marginal_spatial_sd: sigma_v must be positive");
  if (!(average_row_sum > 0.0)) throw std::invalid_argument("marginal_spatial_sd: average row sum must be positive");
  return sigma_v / (0.7 * average_row_sum);
}

}  // namespace hidpop
