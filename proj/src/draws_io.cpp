#include "hidpop/draws_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <string>

#include "hidpop/errors.hpp"

namespace hidpop {

static_assert(std::endian::native == std::endian::little, "draws format assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'H', 'P', 'D', 'R', 'A', 'W', 'S', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw FormatError("draws file is truncated");
  return value;
}

void put_block(std::ostream& out, const Eigen::MatrixXd& m) {
  // Column-major storage already keeps each draw contiguous.
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void get_block(std::istream& in, Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
  m.resize(rows, cols);
  if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size())))
    throw FormatError("draws file is truncated");
}

}  // namespace

void write_draws(std::ostream& out, const PosteriorDraws& d) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put<std::int32_t>(out, d.n_regions);
  put<std::int32_t>(out, d.n_periods);
  put<std::int32_t>(out, d.k_regressors);
  put<std::int32_t>(out, d.n_draws());
  put<std::int32_t>(out, d.n_chains);
  put<double>(out, d.average_row_sum);
  const auto& c = d.config;
  put<std::int32_t>(out, c.n_iter);
  put<std::int32_t>(out, c.burn_in);
  put<std::int32_t>(out, c.thin);
  put<std::uint64_t>(out, c.seed);
  put<double>(out, c.mh_step_scale_alpha);
  put<double>(out, c.mh_step_scale_eps);
  put<std::uint8_t>(out, c.center_car ? 1 : 0);
  put<std::uint8_t>(out, c.car_df == CarDf::PanelCells ? 0 : 1);
  put_block(out, d.y_observed);
  put_block(out, d.beta);
  put_block(out, d.u_plus);
  put_block(out, d.eta_plus);
  put_block(out, d.v);
  put_block(out, d.variances);
  for (int ch : d.chain) put<std::int32_t>(out, ch);
  for (const auto& g : d.diagnostics) {
    put<std::int64_t>(out, g.proposals_alpha);
    put<std::int64_t>(out, g.accepted_alpha);
    put<std::int64_t>(out, g.proposals_eps);
    put<std::int64_t>(out, g.accepted_eps);
    put<std::int64_t>(out, g.floored);
  }
  if (!out) throw std::runtime_error("failed writing draws");
}

void write_draws(const std::filesystem::path& path, const PosteriorDraws& draws) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_draws(out, draws);
}

PosteriorDraws read_draws(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size())) throw ValidationError("draws file is empty");
  if (magic != kMagic) throw FormatError("not a draws file (bad magic)");
  if (get<std::uint32_t>(in) != kVersion) throw FormatError("unsupported draws file version");
  PosteriorDraws d;
  d.n_regions = get<std::int32_t>(in);
  d.n_periods = get<std::int32_t>(in);
  d.k_regressors = get<std::int32_t>(in);
  const int s = get<std::int32_t>(in);
  d.n_chains = get<std::int32_t>(in);
  if (d.n_regions < 1 || d.n_periods < 1 || d.k_regressors < 1 || s < 0 || d.n_chains < 1)
    throw FormatError("draws file has invalid dimensions");
  if (s == 0) throw ValidationError("draws file holds no draws");
  d.average_row_sum = get<double>(in);
  auto& c = d.config;
  c.n_iter = get<std::int32_t>(in);
  c.burn_in = get<std::int32_t>(in);
  c.thin = get<std::int32_t>(in);
  c.seed = get<std::uint64_t>(in);
  c.mh_step_scale_alpha = get<double>(in);
  c.mh_step_scale_eps = get<double>(in);
  c.center_car = get<std::uint8_t>(in) != 0;
  c.car_df = get<std::uint8_t>(in) == 0 ? CarDf::PanelCells : CarDf::Regions;
  const Eigen::Index n = d.n_regions, nt = Eigen::Index(d.n_regions) * d.n_periods;
  get_block(in, d.y_observed, n, d.n_periods);
  get_block(in, d.beta, d.k_regressors, s);
  get_block(in, d.u_plus, nt, s);
  get_block(in, d.eta_plus, n, s);
  get_block(in, d.v, n, s);
  get_block(in, d.variances, 5, s);
  d.chain.resize(static_cast<std::size_t>(s));
  for (auto& ch : d.chain) ch = get<std::int32_t>(in);
  d.diagnostics.resize(static_cast<std::size_t>(d.n_chains));
  for (auto& g : d.diagnostics) {
    g.proposals_alpha = get<std::int64_t>(in);
    g.accepted_alpha = get<std::int64_t>(in);
    g.proposals_eps = get<std::int64_t>(in);
    g.accepted_eps = get<std::int64_t>(in);
    g.floored = get<std::int64_t>(in);
  }
  return d;
}

PosteriorDraws read_draws(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open draws file " + path.string());
  return read_draws(in);
}

void write_draws_csv(std::ostream& out, const PosteriorDraws& d) {
  out << "draw,chain";
  for (int k = 0; k < d.k_regressors; ++k) out << ",beta_" << k;
  out << ",sigma2_alpha,sigma2_eps,sigma2_v,sigma2_u,sigma2_eta";
  for (int i = 0; i < d.n_regions; ++i) out << ",eta_plus_" << i;
  for (int i = 0; i < d.n_regions; ++i) out << ",v_" << i;
  for (int i = 0; i < d.n_regions; ++i)
    for (int t = 0; t < d.n_periods; ++t) out << ",u_plus_" << i << '_' << t;
  out << '\n' << std::setprecision(17);
  for (int s = 0; s < d.n_draws(); ++s) {
    out << s << ',' << d.chain[static_cast<std::size_t>(s)];
    for (Eigen::Index r = 0; r < d.beta.rows(); ++r) out << ',' << d.beta(r, s);
    for (Eigen::Index r = 0; r < 5; ++r) out << ',' << d.variances(r, s);
    for (Eigen::Index r = 0; r < d.eta_plus.rows(); ++r) out << ',' << d.eta_plus(r, s);
    for (Eigen::Index r = 0; r < d.v.rows(); ++r) out << ',' << d.v(r, s);
    for (Eigen::Index r = 0; r < d.u_plus.rows(); ++r) out << ',' << d.u_plus(r, s);
    out << '\n';
  }
}

}  // namespace hidpop
