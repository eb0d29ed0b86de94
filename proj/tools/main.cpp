// Command-line front end: model/dataset construction from a JSON config,
// optimizer dispatch, and artifact persistence (trace CSVs, result JSON,
// spectra, uncertainty reports, synthetic datasets).
//
// Exit codes: 0 success (including non-converged runs, flagged in the result
// JSON), 2 configuration error, 3 model/runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sloppyopt/bench.hpp"
#include "sloppyopt/hierarchical.hpp"
#include "sloppyopt/jsonio.hpp"
#include "sloppyopt/models.hpp"
#include "sloppyopt/uncertainty.hpp"

namespace fs = std::filesystem;
using namespace sloppyopt;

namespace {

struct BuiltProblem {
  std::shared_ptr<const ResidualProblem> problem;
  std::shared_ptr<const ForwardModel> model;  // null for raw residual problems
  Dataset dataset;
  bool has_dataset = false;
  Vec default_start;
  std::vector<std::string> parameter_names;
  Vec box_width;  // physical box width per parameter (1 for raw problems)
};

ToyKineticsConstants parse_kinetics_constants(const json& j) {
  require_keys(j,
               {"site_density_F", "site_density_S", "atom_fraction", "atom_mass",
                "desorption_prefactor", "lh_prefactor", "chem_desorption_prefactor",
                "chem_desorption_energy"},
               "model.constants");
  ToyKineticsConstants c;
  c.site_density_F = get_or(j, "site_density_F", c.site_density_F);
  c.site_density_S = get_or(j, "site_density_S", c.site_density_S);
  c.atom_fraction = get_or(j, "atom_fraction", c.atom_fraction);
  c.atom_mass = get_or(j, "atom_mass", c.atom_mass);
  c.desorption_prefactor = get_or(j, "desorption_prefactor", c.desorption_prefactor);
  c.lh_prefactor = get_or(j, "lh_prefactor", c.lh_prefactor);
  c.chem_desorption_prefactor =
      get_or(j, "chem_desorption_prefactor", c.chem_desorption_prefactor);
  c.chem_desorption_energy = get_or(j, "chem_desorption_energy", c.chem_desorption_energy);
  return c;
}

std::shared_ptr<const ForwardModel> build_forward_model(const json& m) {
  const auto id = get_required<std::string>(m, "id", "model");
  if (id == "sum_of_exponentials") {
    require_keys(m, {"id", "n", "samples", "t_min", "t_max"}, "model");
    return std::make_shared<SumOfExponentialsModel>(
        get_required<int>(m, "n", "model"), get_or(m, "samples", 0),
        get_or(m, "t_min", 0.1), get_or(m, "t_max", 20.0));
  }
  if (id == "toy_kinetics") {
    require_keys(m, {"id", "pressures", "temperatures", "grid", "constants"}, "model");
    ToyKineticsConstants constants;
    if (m.contains("constants")) constants = parse_kinetics_constants(m.at("constants"));
    if (m.contains("grid")) {
      const auto g = m.at("grid");
      if (!g.is_array() || g.size() != 2) throw config_error("model.grid: expected [np, nt]");
      return std::make_shared<ToySurfaceKinetics>(
          ToySurfaceKinetics::grid(g[0].get<int>(), g[1].get<int>(), constants));
    }
    return std::make_shared<ToySurfaceKinetics>(
        get_required<std::vector<double>>(m, "pressures", "model"),
        get_required<std::vector<double>>(m, "temperatures", "model"), constants);
  }
  return nullptr;
}

BuiltProblem build_problem(const json& cfg) {
  if (!cfg.contains("model")) throw config_error("config: missing \"model\"");
  const json& m = cfg.at("model");
  const auto id = get_required<std::string>(m, "id", "model");

  BuiltProblem built;
  if (id == "prescribed_quadratic") {
    require_keys(m, {"id", "n", "m", "decades", "seed", "axis_aligned"}, "model");
    if (cfg.contains("dataset"))
      throw config_error("prescribed_quadratic is self-contained; remove \"dataset\"");
    const int n = get_required<int>(m, "n", "model");
    auto quad = std::make_shared<PrescribedSpectrumQuadratic>(
        n, get_or(m, "m", 2 * n), get_or(m, "decades", 1.0),
        static_cast<std::uint64_t>(get_or(m, "seed", 42)), get_or(m, "axis_aligned", false));
    built.problem = quad;
    built.default_start = Vec::Constant(n, 0.8);
    for (int i = 0; i < n; ++i) built.parameter_names.push_back("theta_" + std::to_string(i));
    built.box_width = Vec::Ones(n);
    return built;
  }

  auto model = build_forward_model(m);
  if (!model) throw config_error("unknown model id: " + id);

  Dataset ds;
  if (cfg.contains("dataset")) {
    const json& d = cfg.at("dataset");
    require_keys(d, {"path", "generate"}, "dataset");
    if (d.contains("path") == d.contains("generate"))
      throw config_error("dataset: give exactly one of \"path\" or \"generate\"");
    if (d.contains("path")) {
      const auto path = d.at("path").get<std::string>();
      if (!fs::exists(path)) throw config_error("dataset file does not exist: " + path);
      ds = load_dataset_csv(path);
    } else {
      const json& g = d.at("generate");
      require_keys(g, {"noise_rel", "seed", "theta_star"}, "dataset.generate");
      const Vec theta_star = g.contains("theta_star")
                                 ? vec_from_json(g.at("theta_star"), "dataset.generate.theta_star")
                                 : model->default_theta();
      ds = generate_synthetic_dataset(*model, theta_star, get_or(g, "noise_rel", 0.0),
                                      static_cast<std::uint64_t>(get_or(g, "seed", 0)));
    }
  } else {
    ds = generate_synthetic_dataset(*model, model->default_theta(), 0.0, 0);
  }
  built.problem = std::make_shared<DatasetResidualProblem>(model, ds);
  built.model = model;
  built.dataset = std::move(ds);
  built.has_dataset = true;
  built.default_start = model->default_theta();
  built.parameter_names = model->parameter_names();
  built.box_width = model->bounds().width();
  return built;
}

Vec resolve_theta0(const json& cfg, const BuiltProblem& built) {
  const int n = built.problem->dimension();
  if (!cfg.contains("theta0")) return built.default_start;
  const json& t = cfg.at("theta0");
  if (t.is_array()) {
    Vec v = vec_from_json(t, "theta0");
    if (v.size() != n) throw config_error("theta0: wrong length");
    return v;
  }
  require_keys(t, {"constant", "shift"}, "theta0");
  if (t.contains("constant")) return Vec::Constant(n, t.at("constant").get<double>());
  if (t.contains("shift")) {
    const double s = t.at("shift").get<double>();
    return (built.default_start.array() + s).min(0.98).max(0.02).matrix();
  }
  throw config_error("theta0: give an array, {\"constant\": x} or {\"shift\": s}");
}

HierarchicalConfig parse_hier_config(const json& o, const std::string& ctx) {
  require_keys(o,
               {"name", "strategy", "k", "seed", "budget", "n_max", "eps_stop", "lambda_reg",
                "gamma", "tau", "fd_step", "realign", "resample_sketch", "stiff_evals_per_dim",
                "sloppy_evals_per_dim", "inner_x_tol", "inner_f_tol", "inner_step",
                "misalignment_window"},
               ctx);
  HierarchicalConfig cfg;
  const auto strategy = get_or<std::string>(o, "strategy", "exact");
  if (strategy == "exact")
    cfg.strategy = Strategy::Exact;
  else if (strategy == "stochastic")
    cfg.strategy = Strategy::Stochastic;
  else
    throw config_error(ctx + ": strategy must be \"exact\" or \"stochastic\"");
  cfg.sketch_k = get_or(o, "k", cfg.sketch_k);
  cfg.seed = static_cast<std::uint64_t>(get_or<long long>(o, "seed", 0));
  cfg.max_outer_iterations = get_or(o, "n_max", cfg.max_outer_iterations);
  cfg.eps_stop = get_or(o, "eps_stop", cfg.eps_stop);
  cfg.lambda_reg = get_or(o, "lambda_reg", cfg.lambda_reg);
  cfg.gamma = get_or(o, "gamma", cfg.gamma);
  cfg.tau = get_or(o, "tau", cfg.tau);
  cfg.fd_step = get_or(o, "fd_step", cfg.fd_step);
  cfg.realign = get_or(o, "realign", cfg.realign);
  cfg.resample_sketch = get_or(o, "resample_sketch", cfg.resample_sketch);
  cfg.stiff_evals_per_dim = get_or(o, "stiff_evals_per_dim", cfg.stiff_evals_per_dim);
  cfg.sloppy_evals_per_dim = get_or(o, "sloppy_evals_per_dim", cfg.sloppy_evals_per_dim);
  cfg.inner_x_tol = get_or(o, "inner_x_tol", cfg.inner_x_tol);
  cfg.inner_f_tol = get_or(o, "inner_f_tol", cfg.inner_f_tol);
  cfg.inner_step = get_or(o, "inner_step", cfg.inner_step);
  cfg.misalignment_window = get_or(o, "misalignment_window", cfg.misalignment_window);
  return cfg;
}

struct CliOverrides {
  std::string strategy;
  int k = -1;
  long long seed = -1;
  std::string out;
  long budget = -2;  // -2: not given (-1 means unlimited in configs)
  bool no_realign = false;
  bool want_uncertainty = false;
};

json spectrum_to_json(const Vec& eigenvalues) {
  json arr = json::array();
  for (int i = 0; i < eigenvalues.size(); ++i) arr.push_back(eigenvalues[i]);
  return arr;
}

void write_json_file(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json uncertainty_to_json(const UncertaintyReport& report, const BuiltProblem& built,
                         const Vec& theta_default, const Vec& theta_opt) {
  json params = json::array();
  for (int i = 0; i < theta_opt.size(); ++i) {
    json p;
    p["name"] = built.parameter_names[i];
    p["default_value"] = theta_default[i];
    p["optimized_value"] = theta_opt[i];
    p["delta_theta"] = report.delta_theta[i];
    p["delta_theta_physical"] = report.delta_theta[i] * built.box_width[i];
    p["class"] = parameter_class_name(report.classification[i]);
    params.push_back(std::move(p));
  }
  json out;
  out["delta_phi_threshold"] = report.delta_phi_threshold;
  out["singular"] = report.singular;
  out["parameters"] = std::move(params);
  return out;
}

int cmd_optimize(const std::string& config_path, const CliOverrides& ov) {
  const json cfg = load_json_file(config_path);
  require_keys(cfg, {"model", "dataset", "theta0", "optimizer", "output_dir", "uncertainty"},
               "config");
  BuiltProblem built = build_problem(cfg);
  const Vec theta0 = resolve_theta0(cfg, built);

  json opt = cfg.contains("optimizer") ? cfg.at("optimizer") : json::object();
  if (!opt.contains("name")) opt["name"] = "hierarchical";
  if (!ov.strategy.empty()) opt["strategy"] = ov.strategy;
  if (ov.k >= 0) opt["k"] = ov.k;
  if (ov.seed >= 0) opt["seed"] = ov.seed;
  if (ov.budget != -2) opt["budget"] = ov.budget;
  if (ov.no_realign) opt["realign"] = false;
  const std::string out_dir =
      !ov.out.empty() ? ov.out : get_or<std::string>(cfg, "output_dir", "out");
  fs::create_directories(out_dir);

  const auto name = opt.at("name").get<std::string>();
  const long budget = get_or<long>(opt, "budget", -1);

  OptimizationTrace trace;
  Evaluator ev(*built.problem, &trace);
  if (budget >= 0) ev.set_budget(budget);

  json result;
  result["model"] = cfg.at("model");
  result["optimizer"] = opt;
  result["theta0"] = vec_to_json(theta0);

  Vec theta_final;
  double loss_final = 0.0;
  if (name == "hierarchical") {
    const HierarchicalConfig hcfg = parse_hier_config(opt, "optimizer");
    const HierarchicalResult res = run_hierarchical(ev, trace, theta0, hcfg);
    theta_final = res.theta_final;
    loss_final = res.loss_final;
    result["strategy"] = strategy_name(hcfg.strategy);
    if (hcfg.strategy == Strategy::Stochastic) result["k"] = hcfg.sketch_k;
    result["seed"] = static_cast<long long>(hcfg.seed);
    result["converged"] = res.converged;
    result["iterations"] = res.iterations;
    result["budget_exhausted"] = res.budget_exhausted;
    result["eigenspectrum"] = spectrum_to_json(res.final_eigenvalues);
    result["misalignment_history"] = res.misalignment_history;
    result["flat_region_events"] = res.flat_region_events;
    json iteration_spectra = json::array();
    for (const auto& d : trace.iterations) iteration_spectra.push_back(spectrum_to_json(d.eigenvalues));
    result["iteration_eigenvalues"] = std::move(iteration_spectra);
    if (ov.want_uncertainty || get_or(cfg, "uncertainty", false)) {
      Evaluator uev(*built.problem);
      const Mat jac = fd_jacobian(uev, theta_final, hcfg.fd_step);
      const UncertaintyReport report = parameter_uncertainty(
          gauss_newton_hessian(jac, hcfg.lambda_reg), loss_final);
      write_json_file(uncertainty_to_json(report, built, built.default_start, theta_final),
                      fs::path(out_dir) / "uncertainty.json");
    }
  } else if (name == "powell" || name == "nelder_mead" || name == "de" || name == "lm") {
    require_keys(opt, {"name", "seed", "budget", "pop_size", "max_generations",
                       "recombination", "polish"},
                 "optimizer");
    const std::uint64_t seed = static_cast<std::uint64_t>(get_or<long long>(opt, "seed", 0));
    const long run_budget = budget >= 0 ? budget : 2000;
    if (budget < 0) ev.set_budget(run_budget);
    BaselineResult res;
    if (name == "powell") {
      res = full_space_powell(ev, theta0, static_cast<int>(run_budget * 4));
    } else if (name == "nelder_mead") {
      res = full_space_nelder_mead(ev, theta0, static_cast<int>(run_budget * 4));
    } else if (name == "de") {
      DEConfig dcfg;
      dcfg.seed = seed;
      dcfg.pop_size = get_or(opt, "pop_size", dcfg.pop_size);
      dcfg.max_generations = get_or(opt, "max_generations", dcfg.max_generations);
      dcfg.recombination = get_or(opt, "recombination", dcfg.recombination);
      dcfg.polish = get_or(opt, "polish", dcfg.polish);
      res = differential_evolution(ev, BoundsBox::unit(ev.dimension()), dcfg, theta0);
    } else {
      res = levenberg_marquardt_fd(ev, theta0, BoundsBox::unit(ev.dimension()));
    }
    theta_final = res.x;
    loss_final = res.f;
    result["seed"] = static_cast<long long>(seed);
    result["converged"] = !res.budget_exhausted;
    result["budget_exhausted"] = res.budget_exhausted;
  } else {
    throw config_error("unknown optimizer name: " + name);
  }

  result["theta_final"] = vec_to_json(theta_final);
  result["loss_final"] = loss_final;
  result["calls"] = ev.calls();
  write_trace_csv(trace, (fs::path(out_dir) / "trace.csv").string());
  result["trace_file"] = "trace.csv";
  write_json_file(result, fs::path(out_dir) / "result.json");
  return 0;
}

OptimizerSpec parse_bench_optimizer(const json& o) {
  require_keys(o, {"name", "k", "pop_size", "max_generations", "recombination", "polish",
                   "n_max", "eps_stop", "lambda_reg", "gamma", "tau", "fd_step", "realign",
                   "stiff_evals_per_dim", "sloppy_evals_per_dim"},
               "optimizers[]");
  OptimizerSpec spec;
  spec.name = get_required<std::string>(o, "name", "optimizers[]");
  spec.sketch_k = get_or(o, "k", spec.sketch_k);
  spec.hier.max_outer_iterations = get_or(o, "n_max", spec.hier.max_outer_iterations);
  spec.hier.eps_stop = get_or(o, "eps_stop", spec.hier.eps_stop);
  spec.hier.lambda_reg = get_or(o, "lambda_reg", spec.hier.lambda_reg);
  spec.hier.gamma = get_or(o, "gamma", spec.hier.gamma);
  spec.hier.tau = get_or(o, "tau", spec.hier.tau);
  spec.hier.fd_step = get_or(o, "fd_step", spec.hier.fd_step);
  spec.hier.realign = get_or(o, "realign", spec.hier.realign);
  spec.hier.stiff_evals_per_dim = get_or(o, "stiff_evals_per_dim", spec.hier.stiff_evals_per_dim);
  spec.hier.sloppy_evals_per_dim =
      get_or(o, "sloppy_evals_per_dim", spec.hier.sloppy_evals_per_dim);
  spec.de.pop_size = get_or(o, "pop_size", spec.de.pop_size);
  spec.de.max_generations = get_or(o, "max_generations", spec.de.max_generations);
  spec.de.recombination = get_or(o, "recombination", spec.de.recombination);
  spec.de.polish = get_or(o, "polish", spec.de.polish);
  return spec;
}

int cmd_bench(const std::string& config_path, const CliOverrides& ov) {
  const json cfg = load_json_file(config_path);
  require_keys(cfg,
               {"model", "dataset", "theta0", "budget", "seeds", "checkpoint_every",
                "threshold_fraction", "split", "optimizers", "output_dir"},
               "bench config");
  BuiltProblem built = build_problem(cfg);

  BenchmarkPlan plan;
  plan.theta0 = resolve_theta0(cfg, built);
  plan.budget = get_or<long>(cfg, "budget", 1500);
  if (ov.budget != -2) plan.budget = ov.budget;
  plan.checkpoint_every = get_or(cfg, "checkpoint_every", 25);
  plan.threshold_fraction = get_or(cfg, "threshold_fraction", 0.1);
  if (cfg.contains("seeds")) {
    plan.seeds.clear();
    for (const auto& s : cfg.at("seeds")) plan.seeds.push_back(s.get<std::uint64_t>());
  }
  plan.output_dir = !ov.out.empty() ? ov.out : get_or<std::string>(cfg, "output_dir", "bench_out");

  if (cfg.contains("split")) {
    if (!built.has_dataset) throw config_error("split requires a dataset-backed model");
    const json& sp = cfg.at("split");
    require_keys(sp, {"fraction", "seed", "bins"}, "split");
    std::array<int, 2> bins = {3, 3};
    if (sp.contains("bins")) {
      const auto b = sp.at("bins");
      if (!b.is_array() || b.size() != 2) throw config_error("split.bins: expected [b0, b1]");
      bins = {b[0].get<int>(), b[1].get<int>()};
    }
    auto [train, test] =
        split_dataset(built.dataset, get_or(sp, "fraction", 0.8),
                      static_cast<std::uint64_t>(get_or<long long>(sp, "seed", 0)), bins);
    plan.train_problem = std::make_shared<DatasetResidualProblem>(built.model, std::move(train));
    plan.test_problem = std::make_shared<DatasetResidualProblem>(built.model, std::move(test));
  } else {
    plan.train_problem = built.problem;
  }

  if (!cfg.contains("optimizers") || !cfg.at("optimizers").is_array() ||
      cfg.at("optimizers").empty())
    throw config_error("bench config: \"optimizers\" must be a non-empty array");
  for (const auto& o : cfg.at("optimizers")) plan.optimizers.push_back(parse_bench_optimizer(o));

  run_benchmark(plan);
  return 0;
}

int cmd_spectrum(const std::string& config_path, const CliOverrides& ov) {
  const json cfg = load_json_file(config_path);
  require_keys(cfg, {"model", "dataset", "theta0", "theta_from", "fd_step", "lambda_reg",
                     "output_dir"},
               "spectrum config");
  BuiltProblem built = build_problem(cfg);
  Vec theta;
  if (cfg.contains("theta_from")) {
    const json prior = load_json_file(cfg.at("theta_from").get<std::string>());
    if (!prior.contains("theta_final"))
      throw config_error("theta_from: file has no \"theta_final\"");
    theta = vec_from_json(prior.at("theta_final"), "theta_from.theta_final");
  } else {
    theta = resolve_theta0(cfg, built);
  }
  const double h = get_or(cfg, "fd_step", 1e-6);
  const double lambda_reg = get_or(cfg, "lambda_reg", 0.0);
  Evaluator ev(*built.problem);
  const EigenSpectrum spectrum =
      eigendecompose(gauss_newton_hessian(fd_jacobian(ev, theta, h), lambda_reg));

  const std::string out_dir =
      !ov.out.empty() ? ov.out : get_or<std::string>(cfg, "output_dir", "out");
  fs::create_directories(out_dir);
  json result;
  result["theta"] = vec_to_json(theta);
  result["lambda_reg"] = lambda_reg;
  result["eigenvalues"] = spectrum_to_json(spectrum.eigenvalues);
  write_json_file(result, fs::path(out_dir) / "spectrum.json");
  std::ofstream csv(fs::path(out_dir) / "spectrum.csv");
  csv << "index,eigenvalue\n";
  for (int i = 0; i < spectrum.eigenvalues.size(); ++i)
    csv << i << ',' << detail::format_double(spectrum.eigenvalues[i]) << '\n';
  return 0;
}

int cmd_uncertainty(const std::string& config_path, const CliOverrides& ov) {
  const json cfg = load_json_file(config_path);
  require_keys(cfg, {"model", "dataset", "theta0", "theta_from", "fd_step", "lambda_reg",
                     "fraction", "stiff_cutoff", "output_dir"},
               "uncertainty config");
  BuiltProblem built = build_problem(cfg);
  Vec theta;
  if (cfg.contains("theta_from")) {
    const json prior = load_json_file(cfg.at("theta_from").get<std::string>());
    if (!prior.contains("theta_final"))
      throw config_error("theta_from: file has no \"theta_final\"");
    theta = vec_from_json(prior.at("theta_final"), "theta_from.theta_final");
  } else {
    theta = resolve_theta0(cfg, built);
  }
  Evaluator ev(*built.problem);
  const double phi = ev.loss(theta);
  const Mat jac = fd_jacobian(ev, theta, get_or(cfg, "fd_step", 1e-6));
  const UncertaintyReport report =
      parameter_uncertainty(gauss_newton_hessian(jac, get_or(cfg, "lambda_reg", 1e-6)), phi,
                            get_or(cfg, "fraction", 0.01), get_or(cfg, "stiff_cutoff", 0.5));
  const std::string out_dir =
      !ov.out.empty() ? ov.out : get_or<std::string>(cfg, "output_dir", "out");
  fs::create_directories(out_dir);
  json j = uncertainty_to_json(report, built, built.default_start, theta);
  j["loss"] = phi;
  write_json_file(j, fs::path(out_dir) / "uncertainty.json");
  return 0;
}

int cmd_generate_data(const std::string& config_path, const CliOverrides& ov) {
  const json cfg = load_json_file(config_path);
  require_keys(cfg, {"model", "theta_star", "noise_rel", "seed", "output"}, "generate config");
  if (!cfg.contains("model")) throw config_error("generate config: missing \"model\"");
  auto model = build_forward_model(cfg.at("model"));
  if (!model) throw config_error("generate-data requires a forward model");
  const Vec theta_star = cfg.contains("theta_star")
                             ? vec_from_json(cfg.at("theta_star"), "theta_star")
                             : model->default_theta();
  const Dataset ds =
      generate_synthetic_dataset(*model, theta_star, get_or(cfg, "noise_rel", 0.0),
                                 static_cast<std::uint64_t>(get_or<long long>(cfg, "seed", 0)));
  std::string out_path = get_or<std::string>(cfg, "output", "dataset.csv");
  if (!ov.out.empty()) out_path = ov.out;
  if (const fs::path parent = fs::path(out_path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  save_dataset_csv(ds, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Derivative-free nonlinear least-squares optimization with "
               "stiff/sloppy subspace decomposition"};
  app.require_subcommand(1);

  std::string config_path;
  CliOverrides ov;

  auto add_common = [&](CLI::App* sub, bool with_optimizer_flags) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", ov.out, "output directory (overrides config)");
    if (with_optimizer_flags) {
      sub->add_option("--strategy", ov.strategy, "hierarchical strategy")
          ->check(CLI::IsMember({"exact", "stochastic"}));
      sub->add_option("--k", ov.k, "sketch rank for the stochastic strategy");
      sub->add_option("--seed", ov.seed, "random seed");
      sub->add_option("--budget", ov.budget, "simulator call budget");
      sub->add_flag("--no-realign", ov.no_realign, "disable sloppy re-alignment");
      sub->add_flag("--uncertainty", ov.want_uncertainty,
                    "also write a parameter-uncertainty report");
    }
  };

  auto* optimize = app.add_subcommand("optimize", "run one optimization");
  add_common(optimize, true);
  auto* bench = app.add_subcommand("bench", "run a multi-optimizer benchmark plan");
  add_common(bench, false);
  bench->add_option("--budget", ov.budget, "simulator call budget (overrides config)");
  auto* spectrum = app.add_subcommand("spectrum", "export the Gauss-Newton eigenspectrum");
  add_common(spectrum, false);
  auto* uncertainty = app.add_subcommand("uncertainty", "Hessian-derived parameter uncertainty");
  add_common(uncertainty, false);
  auto* generate = app.add_subcommand("generate-data", "write a synthetic dataset CSV");
  add_common(generate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (optimize->parsed()) return cmd_optimize(config_path, ov);
    if (bench->parsed()) return cmd_bench(config_path, ov);
    if (spectrum->parsed()) return cmd_spectrum(config_path, ov);
    if (uncertainty->parsed()) return cmd_uncertainty(config_path, ov);
    if (generate->parsed()) return cmd_generate_data(config_path, ov);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
