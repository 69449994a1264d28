#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hidpop/draws_io.hpp"
#include "hidpop/errors.hpp"
#include "hidpop/gibbs_sampler.hpp"
#include "hidpop/panel.hpp"
#include "hidpop/posterior_analysis.hpp"
#include "hidpop/simulation.hpp"
#include "hidpop/sir_screening.hpp"
#include "hidpop/spatial_graph.hpp"

namespace py = pybind11;
using namespace hidpop;

namespace {

SpatialGraph graph_from_edges(int n_regions, const std::vector<std::tuple<int, int, double>>& edges) {
  std::vector<std::vector<Neighbor>> adj(static_cast<std::size_t>(n_regions));
  for (auto [i, j, w] : edges) {
    if (i < 0 || j < 0 || i >= n_regions || j >= n_regions) throw std::out_of_range("edge index out of range");
    adj[static_cast<std::size_t>(i)].push_back({j, w});
    adj[static_cast<std::size_t>(j)].push_back({i, w});
  }
  return SpatialGraph(std::move(adj));
}

}  // namespace

PYBIND11_MODULE(_hidpop, m) {
  m.doc() = "Bayesian spatial stochastic frontier for hidden-population estimation";

  auto base = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  (void)base;

  py::class_<SpatialGraph>(m, "SpatialGraph")
      .def_property_readonly("n_regions", &SpatialGraph::n_regions)
      .def_property_readonly("n_edges", &SpatialGraph::n_edges)
      .def_property_readonly("average_row_sum", &SpatialGraph::average_row_sum)
      .def_property_readonly("row_sums", &SpatialGraph::row_sums)
      .def("car_precision", &SpatialGraph::car_precision_dense)
      .def("quadratic_form", [](const SpatialGraph& g, const Eigen::VectorXd& v) {
        return car_quadratic_form(g, {v.data(), static_cast<std::size_t>(v.size())});
      });
  m.def("queen_grid", &build_queen_grid, py::arg("rows"), py::arg("cols"));
  m.def("load_adjacency", py::overload_cast<const std::filesystem::path&>(&load_adjacency), py::arg("path"));
  m.def("graph_from_edges", &graph_from_edges, py::arg("n_regions"), py::arg("edges"),
        "Undirected weighted edges (i, j, w), each listed once.");

  py::class_<PanelDataset>(m, "PanelDataset")
      .def(py::init([](Eigen::MatrixXd y, Eigen::MatrixXd x) {
             PanelDataset d{std::move(y), std::move(x)};
             d.validate();
             return d;
           }),
           py::arg("y"), py::arg("x"))
      .def_readonly("y", &PanelDataset::y)
      .def_readonly("x", &PanelDataset::x)
      .def_property_readonly("n_regions", &PanelDataset::n_regions)
      .def_property_readonly("n_periods", &PanelDataset::n_periods);
  m.def("read_panel_csv", py::overload_cast<const std::filesystem::path&>(&read_panel_csv), py::arg("path"));

  py::enum_<ErrorLaw>(m, "ErrorLaw").value("normal", ErrorLaw::Normal).value("student_t", ErrorLaw::StudentT);
  py::class_<DgpConfig>(m, "DgpConfig")
      .def(py::init<>())
      .def_readwrite("rows", &DgpConfig::rows)
      .def_readwrite("cols", &DgpConfig::cols)
      .def_readwrite("periods", &DgpConfig::periods)
      .def_readwrite("beta_true", &DgpConfig::beta_true)
      .def_readwrite("sigma_alpha", &DgpConfig::sigma_alpha)
      .def_readwrite("sigma_eta", &DgpConfig::sigma_eta)
      .def_readwrite("sigma_u", &DgpConfig::sigma_u)
      .def_readwrite("sigma_eps", &DgpConfig::sigma_eps)
      .def_readwrite("sigma_v", &DgpConfig::sigma_v)
      .def_readwrite("eps_law", &DgpConfig::eps_law)
      .def_readwrite("t_df", &DgpConfig::t_df)
      .def_readwrite("seed", &DgpConfig::seed);
  py::class_<SimulatedTruth>(m, "SimulatedTruth")
      .def_readonly("dataset", &SimulatedTruth::dataset)
      .def_readonly("u_plus", &SimulatedTruth::true_u_plus)
      .def_readonly("eta_plus", &SimulatedTruth::true_eta_plus)
      .def_readonly("v", &SimulatedTruth::true_v)
      .def_readonly("alpha", &SimulatedTruth::true_alpha)
      .def_readonly("eps", &SimulatedTruth::true_eps)
      .def_readonly("P", &SimulatedTruth::true_P);
  m.def("simulate", py::overload_cast<const DgpConfig&>(&simulate), py::arg("config"));
  m.def("lambda_of", &lambda_of, py::arg("config"));
  m.def("lambda_scenario", &make_lambda_scenario, py::arg("target_lambda"), py::arg("base"));

  py::enum_<CarDf>(m, "CarDf").value("panel_cells", CarDf::PanelCells).value("regions", CarDf::Regions);
  py::class_<PriorConfig>(m, "PriorConfig")
      .def(py::init<>())
      .def_readwrite("beta_cov_scale", &PriorConfig::beta_cov_scale)
      .def_readwrite("r_star_u", &PriorConfig::r_star_u)
      .def_readwrite("r_star_eta", &PriorConfig::r_star_eta)
      .def_readwrite("qbar_v", &PriorConfig::qbar_v)
      .def_readwrite("nbar_v", &PriorConfig::nbar_v);
  py::class_<ChainConfig>(m, "ChainConfig")
      .def(py::init<>())
      .def_readwrite("n_iter", &ChainConfig::n_iter)
      .def_readwrite("burn_in", &ChainConfig::burn_in)
      .def_readwrite("thin", &ChainConfig::thin)
      .def_readwrite("seed", &ChainConfig::seed)
      .def_readwrite("mh_step_scale_alpha", &ChainConfig::mh_step_scale_alpha)
      .def_readwrite("mh_step_scale_eps", &ChainConfig::mh_step_scale_eps)
      .def_readwrite("center_car", &ChainConfig::center_car)
      .def_readwrite("car_df", &ChainConfig::car_df);
  py::class_<ChainDiagnostics>(m, "ChainDiagnostics")
      .def_readonly("proposals_alpha", &ChainDiagnostics::proposals_alpha)
      .def_readonly("accepted_alpha", &ChainDiagnostics::accepted_alpha)
      .def_readonly("proposals_eps", &ChainDiagnostics::proposals_eps)
      .def_readonly("accepted_eps", &ChainDiagnostics::accepted_eps)
      .def_readonly("floored", &ChainDiagnostics::floored);
  py::class_<PosteriorDraws>(m, "PosteriorDraws")
      .def_property_readonly("n_draws", &PosteriorDraws::n_draws)
      .def_readonly("n_regions", &PosteriorDraws::n_regions)
      .def_readonly("n_periods", &PosteriorDraws::n_periods)
      .def_readonly("beta", &PosteriorDraws::beta)
      .def_readonly("u_plus", &PosteriorDraws::u_plus)
      .def_readonly("eta_plus", &PosteriorDraws::eta_plus)
      .def_readonly("v", &PosteriorDraws::v)
      .def_readonly("variances", &PosteriorDraws::variances, "5 x S rows: alpha, eps, v, u, eta")
      .def_readonly("chain", &PosteriorDraws::chain)
      .def_readonly("diagnostics", &PosteriorDraws::diagnostics)
      .def_readonly("y_observed", &PosteriorDraws::y_observed);
  m.def("run_chains", &run_chains, py::arg("data"), py::arg("graph"), py::arg("prior"), py::arg("config"),
        py::arg("n_chains") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("write_draws", py::overload_cast<const std::filesystem::path&, const PosteriorDraws&>(&write_draws),
        py::arg("path"), py::arg("draws"));
  m.def("read_draws", py::overload_cast<const std::filesystem::path&>(&read_draws), py::arg("path"));

  m.def(
      "hdi",
      [](const std::vector<double>& draws, double level) {
        auto iv = hdi(draws, level);
        return std::make_pair(iv.lower, iv.upper);
      },
      py::arg("draws"), py::arg("level") = 0.95);
  py::class_<HiddenPopulationInterval>(m, "HiddenPopulationInterval")
      .def_readonly("region", &HiddenPopulationInterval::region)
      .def_readonly("time", &HiddenPopulationInterval::time)
      .def_readonly("point_estimate", &HiddenPopulationInterval::point_estimate)
      .def_readonly("hdi_lower", &HiddenPopulationInterval::hdi_lower)
      .def_readonly("hdi_upper", &HiddenPopulationInterval::hdi_upper)
      .def_readonly("level", &HiddenPopulationInterval::level);
  m.def("hidden_population_intervals", &hidden_population_intervals, py::arg("draws"), py::arg("y_level"),
        py::arg("level") = 0.95);
  py::class_<CoverageReport>(m, "CoverageReport")
      .def_readonly("nominal_level", &CoverageReport::nominal_level)
      .def_readonly("mean", &CoverageReport::posterior_mean_coverage)
      .def_property_readonly("hdi", [](const CoverageReport& r) { return std::make_pair(r.coverage_hdi.lower, r.coverage_hdi.upper); })
      .def_readonly("a", &CoverageReport::a)
      .def_readonly("b", &CoverageReport::b)
      .def_readonly("hits", &CoverageReport::hits)
      .def_readonly("cells", &CoverageReport::cells);
  m.def(
      "coverage",
      [](const PosteriorDraws& d, const Eigen::MatrixXd& y_level, const Eigen::MatrixXd& true_p, double level,
         int n_beta_draws, std::uint64_t seed) {
        RandomStream rng(seed);
        return coverage_report(hidden_population_intervals(d, y_level, level), true_p, level, n_beta_draws, rng);
      },
      py::arg("draws"), py::arg("y_level"), py::arg("true_P"), py::arg("level") = 0.95,
      py::arg("n_beta_draws") = 10000, py::arg("seed") = 1);
  py::enum_<MapeMode>(m, "MapeMode").value("point", MapeMode::PointEstimate).value("per_draw", MapeMode::PerDraw);
  py::class_<MapeSummary>(m, "MapeSummary")
      .def_readonly("average", &MapeSummary::average)
      .def_readonly("median", &MapeSummary::median)
      .def_property_readonly("hdi", [](const MapeSummary& s) { return std::make_pair(s.hdi.lower, s.hdi.upper); })
      .def_readonly("excluded", &MapeSummary::excluded)
      .def_readonly("per_cell", &MapeSummary::per_cell);
  m.def("mape", &mape_summary, py::arg("draws"), py::arg("y_level"), py::arg("true_P"),
        py::arg("mode") = MapeMode::PointEstimate);
  m.def("rho_hat", &rho_hat, py::arg("draws"), py::arg("truth"));
  py::class_<UncapturedSummary>(m, "UncapturedSummary")
      .def_readonly("permanent_pct", &UncapturedSummary::permanent_pct)
      .def_readonly("total_pct", &UncapturedSummary::total_pct)
      .def_readonly("lambda_stat", &UncapturedSummary::lambda_stat)
      .def_readonly("spatial_share", &UncapturedSummary::spatial_share);
  m.def("uncaptured", &uncaptured_summaries, py::arg("draws"));
  m.def(
      "summarize",
      [](const PosteriorDraws& d, double level) {
        py::list out;
        for (const auto& r : summarize_parameters(d, level))
          out.append(py::make_tuple(r.name, r.mean, r.median, r.hdi_lower, r.hdi_upper));
        return out;
      },
      py::arg("draws"), py::arg("level") = 0.95, "Rows of (name, mean, median, hdi_lower, hdi_upper).");

  py::class_<SirTable>(m, "SirTable")
      .def_readonly("sir", &SirTable::sir)
      .def_readonly("expected", &SirTable::expected)
      .def_readonly("exceedance", &SirTable::exceedance)
      .def_readonly("undefined_cells", &SirTable::undefined_cells);
  m.def(
      "sir",
      [](Eigen::MatrixXd counts, Eigen::MatrixXd population, double nu, double alpha) {
        CountPanel p{std::move(counts), std::move(population)};
        p.validate();
        auto t = compute_sir(p);
        t.prior_nu = nu;
        t.prior_alpha = alpha;
        compute_exceedance(t, p);
        return t;
      },
      py::arg("counts"), py::arg("population"), py::arg("nu") = 0.01, py::arg("alpha") = 0.01);
  m.def("exceedance_probability", &exceedance_probability, py::arg("s"), py::arg("expected"), py::arg("nu") = 0.01,
        py::arg("alpha") = 0.01);
  m.def(
      "hotspot_tiers",
      [](const SirTable& t, const std::vector<double>& thresholds) { return flag_hotspots(t, thresholds); },
      py::arg("table"), py::arg("thresholds") = std::vector<double>{0.90, 0.95, 0.99});
}
