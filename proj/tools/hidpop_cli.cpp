// hidpop: simulate | fit | analyze | sir
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "hidpop/draws_io.hpp"
#include "hidpop/errors.hpp"
#include "hidpop/gibbs_sampler.hpp"
#include "hidpop/panel.hpp"
#include "hidpop/posterior_analysis.hpp"
#include "hidpop/simulation.hpp"
#include "hidpop/sir_screening.hpp"
#include "hidpop/spatial_graph.hpp"

#ifndef HIDPOP_VERSION
#define HIDPOP_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hidpop;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config files. JSON: {"iters": 2000, ...} or {"fit": {...}}, or a manifest
// written by a previous run. Anything else is read as `key = value` lines
// with `#` comments and optional `[subcommand]` sections. Keys outside a
// section apply to the subcommand named on the command line.
class FileConfig : public CLI::Config {
public:
  explicit FileConfig(std::string subcommand) : subcommand_(std::move(subcommand)) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    throw CLI::FileError("writing config files is not supported");
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::string text{std::istreambuf_iterator<char>(input), std::istreambuf_iterator<char>()};
    auto first = text.find_first_not_of(" \t\r\n");
    std::vector<CLI::ConfigItem> items;
    if (first != std::string::npos && text[first] == '{')
      from_json(text, items);
    else
      from_key_value(text, items);
    for (auto& item : items)
      if (item.parents.empty() && !subcommand_.empty()) item.parents.push_back(subcommand_);
    return items;
  }

private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void from_json(const std::string& text, std::vector<CLI::ConfigItem>& out) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (j.contains("subcommand") && j.contains("config"))
      j = json{{j["subcommand"].get<std::string>(), j["config"]}};
    collect(j, {}, out);
  }

  static void collect(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        collect(value, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array())
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      else
        item.inputs.push_back(scalar(value));
      out.push_back(std::move(item));
    }
  }

  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

  static void from_key_value(const std::string& text, std::vector<CLI::ConfigItem>& out) {
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      line = trim(line.substr(0, line.find('#')));
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']') {
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw CLI::ConversionError("config line " + std::to_string(line_no) + " is not `key = value`");
      CLI::ConfigItem item;
      if (!section.empty()) item.parents.push_back(section);
      item.name = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      item.inputs.push_back(value);
      out.push_back(std::move(item));
    }
  }

  std::string subcommand_;
};

// Outputs are written into a staging directory and moved into place only
// when every file succeeded; the manifest goes last via rename.
class OutputDir {
public:
  explicit OutputDir(const fs::path& root) : root_(fs::absolute(root).lexically_normal()) {
    created_root_ = fs::create_directories(root_);
    staging_ = root_ / (".staging-" + std::to_string(::getpid()));
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  ~OutputDir() {
    std::error_code ec;
    if (committed_) return;
    fs::remove_all(staging_, ec);
    if (created_root_ && fs::is_empty(root_, ec)) fs::remove(root_, ec);
  }

  fs::path file(const std::string& name) {
    names_.push_back(name);
    return staging_ / name;
  }

  std::ofstream open(const std::string& name) {
    std::ofstream out(file(name), std::ios::binary);
    if (!out) throw std::runtime_error("cannot create " + (staging_ / name).string());
    return out;
  }

  void commit(json manifest) {
    json outputs = json::array();
    for (const auto& n : names_) outputs.push_back((root_ / n).string());
    manifest["outputs"] = outputs;
    {
      std::ofstream m(staging_ / "manifest.json");
      m << manifest.dump(2) << '\n';
      if (!m) throw std::runtime_error("cannot write manifest");
    }
    for (const auto& n : names_) fs::rename(staging_ / n, root_ / n);
    fs::rename(staging_ / "manifest.json", root_ / "manifest.json");
    fs::remove(staging_);
    committed_ = true;
  }

  const fs::path& root() const { return root_; }

private:
  fs::path root_;
  fs::path staging_;
  std::vector<std::string> names_;
  bool committed_ = false;
  bool created_root_ = false;
};

fs::path default_output(const std::string& sub) {
  const char* env = std::getenv("HIDPOP_OUTPUT_ROOT");
  return fs::path(env && *env ? env : "hidpop-runs") / sub;
}

std::pair<int, int> parse_grid(const std::string& s) {
  int r = 0, c = 0;
  char x = 0, extra = 0;
  std::istringstream in(s);
  if (!(in >> r >> x >> c) || (x != 'x' && x != 'X') || (in >> extra) || r < 1 || c < 1)
    throw UsageError("--grid expects ROWSxCOLS, got `" + s + "`");
  return {r, c};
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

json base_manifest(const std::string& sub, std::uint64_t seed, const json& config) {
  return json{{"subcommand", sub}, {"code_version", HIDPOP_VERSION}, {"seed", seed}, {"config", config}};
}

std::string g6(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

std::string g17(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string nan_blank(double v) { return std::isnan(v) ? "" : g6(v); }

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string grid = "7x7";
  int periods = 5;
  std::uint64_t seed = 1;
  std::optional<double> lambda;
  std::optional<double> t_df;
  double sigma_alpha = 0.1, sigma_eta = 0.5, sigma_u = 0.2, sigma_eps = 0.1, sigma_v = 0.4;
  std::vector<double> beta{0.5, -0.5};
  std::string out;
};

void setup_simulate(CLI::App& app, SimulateArgs& a) {
  auto* sub = app.add_subcommand("simulate", "Simulate a panel from the Monte Carlo design");
  sub->add_option("--grid", a.grid, "Queen lattice ROWSxCOLS")->capture_default_str();
  sub->add_option("--periods", a.periods, "Number of periods T")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--seed", a.seed, "Random seed")->capture_default_str();
  sub->add_option("--lambda", a.lambda, "Target (sigma_eta + sigma_u) / sigma_eps; derives sigma_eps");
  sub->add_option("--student-t-df", a.t_df, "Student-t idiosyncratic errors with this many df (> 2)");
  auto* eps = sub->add_option("--sigma-eps", a.sigma_eps)->capture_default_str();
  sub->get_option("--lambda")->excludes(eps);
  sub->add_option("--sigma-alpha", a.sigma_alpha)->capture_default_str();
  sub->add_option("--sigma-eta", a.sigma_eta)->capture_default_str();
  sub->add_option("--sigma-u", a.sigma_u)->capture_default_str();
  sub->add_option("--sigma-v", a.sigma_v)->capture_default_str();
  sub->add_option("--beta", a.beta, "Slopes on z and its spatial lag")->expected(2)->delimiter(',')->capture_default_str();
  sub->add_option("--out", a.out, "Output directory");
}

void run_simulate(const SimulateArgs& a) {
  auto [rows, cols] = parse_grid(a.grid);
  DgpConfig dc;
  dc.rows = rows;
  dc.cols = cols;
  dc.periods = a.periods;
  dc.seed = a.seed;
  dc.sigma_alpha = a.sigma_alpha;
  dc.sigma_eta = a.sigma_eta;
  dc.sigma_u = a.sigma_u;
  dc.sigma_eps = a.sigma_eps;
  dc.sigma_v = a.sigma_v;
  dc.beta_true = Eigen::Vector2d(a.beta[0], a.beta[1]);
  if (a.lambda) dc = make_lambda_scenario(*a.lambda, dc);
  if (a.t_df) {
    dc.eps_law = ErrorLaw::StudentT;
    dc.t_df = *a.t_df;
  }
  dc.validate();

  json config{{"grid", a.grid}, {"periods", a.periods}, {"seed", a.seed}};
  if (a.lambda) config["lambda"] = *a.lambda;
  else config["sigma-eps"] = a.sigma_eps;
  if (a.t_df) config["student-t-df"] = *a.t_df;
  config["sigma-alpha"] = a.sigma_alpha;
  config["sigma-eta"] = a.sigma_eta;
  config["sigma-u"] = a.sigma_u;
  config["sigma-v"] = a.sigma_v;
  config["beta"] = a.beta;

  auto graph = build_queen_grid(rows, cols);
  auto truth = simulate(dc, graph);

  OutputDir out(a.out.empty() ? default_output("simulate") : fs::path(a.out));
  auto t0 = std::chrono::steady_clock::now();
  {
    auto f = out.open("panel.csv");
    write_panel_csv(f, truth.dataset);
  }
  {
    auto f = out.open("truth.csv");
    write_truth_csv(f, truth);
  }
  {
    auto f = out.open("adjacency.txt");
    write_adjacency(f, graph);
  }
  auto m = base_manifest("simulate", a.seed, config);
  m["derived"] = {{"sigma_eps", dc.sigma_eps},
                  {"lambda", lambda_of(dc)},
                  {"eps_law", a.t_df ? "student_t" : "normal"},
                  {"regions", graph.n_regions()},
                  {"rows", truth.dataset.n_regions() * truth.dataset.n_periods()}};
  m["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.commit(m);
  std::cerr << "simulate: " << truth.dataset.n_regions() * truth.dataset.n_periods() << " rows, sigma_eps "
            << dc.sigma_eps << ", lambda " << lambda_of(dc) << " -> " << out.root().string() << '\n';
}

// ---- fit ------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string adjacency;
  std::string grid;
  int iters = 20000, burnin = 10000, thin = 5;
  std::uint64_t seed = 1;
  int chains = 1;
  bool center_car = false;
  std::string car_df = "nt";
  double step_alpha = 0.5, step_eps = 0.1;
  double r_star_u = 0.85, r_star_eta = 0.70;
  std::string draws_format = "binary";
  std::string out;
};

void setup_fit(CLI::App& app, FitArgs& a) {
  auto* sub = app.add_subcommand("fit", "Run the Gibbs sampler on a panel");
  sub->add_option("--data", a.data, "Panel CSV (region,time,y,x1..xK)")->required()->check(CLI::ExistingFile);
  auto* adj = sub->add_option("--adjacency", a.adjacency, "Edge-list adjacency file")->check(CLI::ExistingFile);
  auto* grid = sub->add_option("--grid", a.grid, "Queen lattice ROWSxCOLS instead of an adjacency file");
  adj->excludes(grid);
  sub->add_option("--iters", a.iters)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--burnin", a.burnin)->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--thin", a.thin)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--seed", a.seed)->capture_default_str();
  sub->add_option("--chains", a.chains)->capture_default_str()->check(CLI::Range(1, 256));
  sub->add_flag("--center-car", a.center_car, "Re-centre v to sum zero after each sweep");
  sub->add_option("--car-df", a.car_df, "sigma2_v degrees of freedom: nt (N*T + nbar) or n (N + nbar)")
      ->capture_default_str()
      ->check(CLI::IsMember({"nt", "n"}));
  sub->add_option("--step-alpha", a.step_alpha, "MH step exponent for sigma2_alpha")->capture_default_str();
  sub->add_option("--step-eps", a.step_eps, "MH step exponent for sigma2_eps")->capture_default_str();
  sub->add_option("--r-star-u", a.r_star_u, "Prior median efficiency for u+")->capture_default_str();
  sub->add_option("--r-star-eta", a.r_star_eta, "Prior median efficiency for eta+")->capture_default_str();
  sub->add_option("--draws-format", a.draws_format)
      ->capture_default_str()
      ->check(CLI::IsMember({"binary", "csv", "both"}));
  sub->add_option("--out", a.out, "Output directory");
}

void write_summary_csv(std::ostream& out, const std::vector<ParameterSummary>& rows) {
  out << "parameter,mean,median,hdi_lower,hdi_upper\n";
  for (const auto& r : rows)
    out << r.name << ',' << g6(r.mean) << ',' << g6(r.median) << ',' << nan_blank(r.hdi_lower) << ','
        << nan_blank(r.hdi_upper) << '\n';
}

void run_fit(const FitArgs& a) {
  if (a.adjacency.empty() == a.grid.empty()) throw UsageError("fit needs exactly one of --adjacency or --grid");
  auto data = read_panel_csv(fs::path(a.data));
  SpatialGraph graph;
  if (!a.grid.empty()) {
    auto [rows, cols] = parse_grid(a.grid);
    graph = build_queen_grid(rows, cols);
  } else {
    graph = load_adjacency(fs::path(a.adjacency));
  }
  if (graph.n_regions() != data.n_regions())
    throw ValidationError("panel has " + std::to_string(data.n_regions()) + " regions but the graph has " +
                          std::to_string(graph.n_regions()));

  ChainConfig cc;
  cc.n_iter = a.iters;
  cc.burn_in = a.burnin;
  cc.thin = a.thin;
  cc.seed = a.seed;
  cc.center_car = a.center_car;
  cc.car_df = a.car_df == "n" ? CarDf::Regions : CarDf::PanelCells;
  cc.mh_step_scale_alpha = a.step_alpha;
  cc.mh_step_scale_eps = a.step_eps;
  PriorConfig prior;
  prior.r_star_u = a.r_star_u;
  prior.r_star_eta = a.r_star_eta;

  json config{{"data", absolute(a.data)}};
  if (!a.adjacency.empty()) config["adjacency"] = absolute(a.adjacency);
  else config["grid"] = a.grid;
  config.update(json{{"iters", a.iters}, {"burnin", a.burnin}, {"thin", a.thin}, {"seed", a.seed},
                     {"chains", a.chains}, {"center-car", a.center_car}, {"car-df", a.car_df},
                     {"step-alpha", a.step_alpha}, {"step-eps", a.step_eps}, {"r-star-u", a.r_star_u},
                     {"r-star-eta", a.r_star_eta}, {"draws-format", a.draws_format}});

  OutputDir out(a.out.empty() ? default_output("fit") : fs::path(a.out));
  auto t0 = std::chrono::steady_clock::now();
  std::cerr << "fit: " << a.chains << " chain(s) x " << a.iters << " iterations on N=" << data.n_regions()
            << ", T=" << data.n_periods() << '\n';
  auto draws = run_chains(data, graph, prior, cc, a.chains);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (a.draws_format != "csv") write_draws(out.file("draws.bin"), draws);
  if (a.draws_format != "binary") {
    auto f = out.open("draws.csv");
    write_draws_csv(f, draws);
  }
  {
    auto f = out.open("summary.csv");
    write_summary_csv(f, summarize_parameters(draws, 0.95));
  }
  {
    auto f = out.open("acceptance.csv");
    f << "chain,proposals_alpha,accepted_alpha,rate_alpha,proposals_eps,accepted_eps,rate_eps,floored\n";
    for (std::size_t c = 0; c < draws.diagnostics.size(); ++c) {
      const auto& d = draws.diagnostics[c];
      auto rate = [](long acc, long prop) { return prop > 0 ? double(acc) / double(prop) : 0.0; };
      f << c << ',' << d.proposals_alpha << ',' << d.accepted_alpha << ',' << g6(rate(d.accepted_alpha, d.proposals_alpha))
        << ',' << d.proposals_eps << ',' << d.accepted_eps << ',' << g6(rate(d.accepted_eps, d.proposals_eps)) << ','
        << d.floored << '\n';
      std::cerr << "  chain " << c << ": acceptance alpha " << g6(rate(d.accepted_alpha, d.proposals_alpha)) << ", eps "
                << g6(rate(d.accepted_eps, d.proposals_eps)) << '\n';
    }
  }
  auto m = base_manifest("fit", a.seed, config);
  m["stored_draws"] = draws.n_draws();
  m["stored_draws_per_chain"] = draws.n_draws() / a.chains;
  m["wall_seconds"] = secs;
  out.commit(m);
  std::cerr << "fit: " << draws.n_draws() << " stored draws in " << g6(secs) << "s -> " << out.root().string() << '\n';
}

// ---- analyze --------------------------------------------------------------

struct AnalyzeArgs {
  std::string draws;
  std::string truth;
  std::vector<double> levels{0.90, 0.95, 0.99};
  std::string mape = "point";
  int coverage_draws = 10000;
  std::uint64_t seed = 1;
  std::string out;
  CLI::Option* levels_opt = nullptr;
  CLI::Option* mape_opt = nullptr;
};

void setup_analyze(CLI::App& app, AnalyzeArgs& a) {
  auto* sub = app.add_subcommand("analyze", "Coverage, MAPE and uncaptured-population summaries");
  sub->add_option("--draws", a.draws, "Binary draws file from `fit`")->required()->check(CLI::ExistingFile);
  sub->add_option("--truth", a.truth, "Truth sidecar from `simulate`")->check(CLI::ExistingFile);
  a.levels_opt = sub->add_option("--levels", a.levels, "Credibility levels")->delimiter(',')->capture_default_str();
  a.mape_opt = sub->add_option("--mape", a.mape, "point: |P - E[P]|/P; per-draw: mean over draws of |P - P_s|/P")
                   ->capture_default_str()
                   ->check(CLI::IsMember({"point", "per-draw"}));
  sub->add_option("--coverage-draws", a.coverage_draws, "Beta draws for the coverage summary")
      ->capture_default_str()
      ->check(CLI::Range(100, 100000000));
  sub->add_option("--seed", a.seed, "Seed for the Beta coverage draws")->capture_default_str();
  sub->add_option("--out", a.out, "Output directory");
}

void run_analyze(const AnalyzeArgs& a) {
  const bool have_truth = !a.truth.empty();
  if (!have_truth && (a.levels_opt->count() > 0 || a.mape_opt->count() > 0))
    throw UsageError("coverage and MAPE need --truth");
  for (double l : a.levels)
    if (!(l > 0.0 && l < 1.0)) throw UsageError("--levels must lie in (0, 1)");

  auto draws = read_draws(fs::path(a.draws));
  json config{{"draws", absolute(a.draws)}};
  if (have_truth)
    config.update(json{{"truth", absolute(a.truth)}, {"levels", a.levels}, {"mape", a.mape},
                       {"coverage-draws", a.coverage_draws}, {"seed", a.seed}});

  OutputDir out(a.out.empty() ? default_output("analyze") : fs::path(a.out));
  auto t0 = std::chrono::steady_clock::now();
  {
    auto s = uncaptured_summaries(draws);
    auto f = out.open("uncaptured.csv");
    f << "statistic,value\n"
      << "permanent_pct," << g6(s.permanent_pct) << "\ntotal_pct," << g6(s.total_pct) << "\nlambda,"
      << g6(s.lambda_stat) << "\nspatial_share," << g6(s.spatial_share) << '\n';
  }
  if (have_truth) {
    auto truth = read_truth_csv(fs::path(a.truth));
    if (truth.P.rows() != draws.n_regions || truth.P.cols() != draws.n_periods)
      throw ValidationError("truth table is " + std::to_string(truth.P.rows()) + "x" + std::to_string(truth.P.cols()) +
                            " but the draws are " + std::to_string(draws.n_regions) + "x" +
                            std::to_string(draws.n_periods));
    Eigen::MatrixXd y_level = draws.y_observed.array().exp().matrix();
    RandomStream rng(a.seed);
    auto cov = out.open("coverage.csv");
    auto ivf = out.open("intervals.csv");
    cov << "level,mean_coverage,hdi_lower,hdi_upper,hits,cells\n";
    ivf << "level,region,time,point_estimate,hdi_lower,hdi_upper,true_P\n";
    for (double level : a.levels) {
      auto ivs = hidden_population_intervals(draws, y_level, level);
      auto rep = coverage_report(ivs, truth.P, level, a.coverage_draws, rng);
      cov << g6(level) << ',' << g6(rep.posterior_mean_coverage) << ',' << g6(rep.coverage_hdi.lower) << ','
          << g6(rep.coverage_hdi.upper) << ',' << rep.hits << ',' << rep.cells << '\n';
      for (const auto& iv : ivs)
        ivf << g6(level) << ',' << iv.region << ',' << iv.time << ',' << g17(iv.point_estimate) << ','
            << g17(iv.hdi_lower) << ',' << g17(iv.hdi_upper) << ',' << g17(truth.P(iv.region, iv.time)) << '\n';
      std::cerr << "analyze: coverage at " << level << " = " << g6(rep.posterior_mean_coverage) << '\n';
    }
    auto mode = a.mape == "per-draw" ? MapeMode::PerDraw : MapeMode::PointEstimate;
    auto ms = mape_summary(draws, y_level, truth.P, mode);
    auto mf = out.open("mape.csv");
    mf << "mode,average,median,hdi_lower,hdi_upper,excluded\n"
       << a.mape << ',' << g6(ms.average) << ',' << g6(ms.median) << ',' << nan_blank(ms.hdi.lower) << ','
       << nan_blank(ms.hdi.upper) << ',' << ms.excluded << '\n';

    auto rf = out.open("rho.csv");
    rf << "component,expected_correlation\n";
    Eigen::VectorXd u_truth(draws.n_regions * draws.n_periods);
    for (int i = 0; i < draws.n_regions; ++i)
      for (int t = 0; t < draws.n_periods; ++t) u_truth(i * draws.n_periods + t) = truth.u_plus(i, t);
    auto safe_rho = [](const Eigen::MatrixXd& d, const Eigen::VectorXd& t) {
      try {
        return g6(rho_hat(d, t));
      } catch (const ValidationError&) {
        return std::string();
      }
    };
    rf << "eta_plus," << safe_rho(draws.eta_plus, truth.eta_plus) << "\nu_plus," << safe_rho(draws.u_plus, u_truth)
       << "\nv," << safe_rho(draws.v, truth.v) << '\n';
  }
  auto m = base_manifest("analyze", have_truth ? a.seed : 0, config);
  m["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.commit(m);
  std::cerr << "analyze: -> " << out.root().string() << '\n';
}

// ---- sir ------------------------------------------------------------------

struct SirArgs {
  std::string counts;
  std::vector<double> thresholds{0.90, 0.95, 0.99};
  double nu = 0.01, alpha = 0.01;
  std::string out;
};

void setup_sir(CLI::App& app, SirArgs& a) {
  auto* sub = app.add_subcommand("sir", "Standardized incidence ratios and hot-spot screening");
  sub->add_option("--counts", a.counts, "CSV region,time,count,population")->required()->check(CLI::ExistingFile);
  sub->add_option("--thresholds", a.thresholds, "Exceedance tiers")->delimiter(',')->capture_default_str();
  sub->add_option("--prior-shape", a.nu, "Gamma prior shape nu")->capture_default_str();
  sub->add_option("--prior-rate", a.alpha, "Gamma prior rate alpha")->capture_default_str();
  sub->add_option("--out", a.out, "Output directory");
}

void run_sir(const SirArgs& a) {
  for (double t : a.thresholds)
    if (!(t > 0.0 && t < 1.0)) throw UsageError("--thresholds must lie in (0, 1)");
  auto panel = read_count_csv(fs::path(a.counts));
  auto table = compute_sir(panel);
  table.prior_nu = a.nu;
  table.prior_alpha = a.alpha;
  compute_exceedance(table, panel);
  auto tiers = flag_hotspots(table, a.thresholds);

  json config{{"counts", absolute(a.counts)}, {"thresholds", a.thresholds}, {"prior-shape", a.nu},
              {"prior-rate", a.alpha}};
  OutputDir out(a.out.empty() ? default_output("sir") : fs::path(a.out));
  auto t0 = std::chrono::steady_clock::now();
  {
    auto f = out.open("sir.csv");
    write_sir_csv(f, table, tiers);
  }
  auto m = base_manifest("sir", 0, config);
  m["undefined_cells"] = table.undefined_cells;
  m["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.commit(m);
  std::cerr << "sir: " << panel.s.rows() << "x" << panel.s.cols() << " cells -> " << out.root().string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hidden-population estimation with a Bayesian spatial stochastic frontier"};
  app.set_version_flag("--version", std::string(HIDPOP_VERSION));
  std::string active;
  for (int k = 1; k < argc && active.empty(); ++k)
    for (const char* name : {"simulate", "fit", "analyze", "sir"})
      if (std::string(argv[k]) == name) active = name;
  app.config_formatter(std::make_shared<FileConfig>(active));
  app.set_config("--config", "", "JSON or key = value config file (flags override it); a manifest.json replays its run");
  app.require_subcommand(1);

  SimulateArgs sim;
  FitArgs fit;
  AnalyzeArgs ana;
  SirArgs sir;
  setup_simulate(app, sim);
  setup_fit(app, fit);
  setup_analyze(app, ana);
  setup_sir(app, sir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("simulate")) run_simulate(sim);
    else if (app.got_subcommand("fit")) run_fit(fit);
    else if (app.got_subcommand("analyze")) run_analyze(ana);
    else if (app.got_subcommand("sir")) run_sir(sir);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 4;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
