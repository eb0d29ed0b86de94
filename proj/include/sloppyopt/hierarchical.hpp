#pragma once
// Hierarchical stiff/sloppy optimization. Each outer iteration builds local
// curvature geometry at the iterate (full Gauss-Newton eigendecomposition,
// or the sketched reduced Hessian), minimizes along the stiff basis with
// Powell's method, optionally re-aligns the retained sloppy basis to the
// local curvature, minimizes along it with Nelder-Mead, then rebuilds the
// geometry and tests whether the stiff subspace has stopped rotating.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sloppyopt/core.hpp"
#include "sloppyopt/evaluator.hpp"
#include "sloppyopt/hessian.hpp"
#include "sloppyopt/solvers.hpp"
#include "sloppyopt/subspace.hpp"

namespace sloppyopt {

enum class Strategy { Exact, Stochastic };

inline const char* strategy_name(Strategy s) {
  return s == Strategy::Exact ? "exact" : "stochastic";
}

struct HierarchicalConfig {
  Strategy strategy = Strategy::Exact;
  int max_outer_iterations = 50;  // N_max
  double eps_stop = 1e-4;         // stiff-subspace misalignment tolerance
  double lambda_reg = 1e-6;       // Tikhonov term on the full Hessian
  double gamma = 0.90;            // stiff variance fraction
  double tau = 1e-4;              // sloppy pruning threshold
  int sketch_k = 5;               // sketch rank (Stochastic only)
  double fd_step = 1e-6;          // forward-difference step, normalized coords
  std::uint64_t seed = 0;
  bool realign = true;
  bool resample_sketch = true;  // fresh sketch every outer iteration
  // inner-solver budgets per subspace dimension
  int stiff_evals_per_dim = 60;
  int sloppy_evals_per_dim = 40;
  double inner_x_tol = 1e-6;
  double inner_f_tol = 1e-6;
  double inner_step = 0.05;
  // optional averaging of the misalignment statistic before the convergence
  // test (0/1 = raw value); extension, off by default
  int misalignment_window = 0;

  void validate(int n) const {
    if (max_outer_iterations < 1) throw std::invalid_argument("config: N_max < 1");
    if (eps_stop <= 0.0 || fd_step <= 0.0) throw std::invalid_argument("config: tolerances <= 0");
    if (lambda_reg < 0.0) throw std::invalid_argument("config: lambda_reg < 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("config: gamma in (0,1]");
    if (tau <= 0.0) throw std::invalid_argument("config: tau <= 0");
    if (strategy == Strategy::Stochastic && (sketch_k < 1 || sketch_k > n))
      throw std::invalid_argument("config: need 1 <= sketch_k <= n for the stochastic strategy");
  }
};

/// Local geometry at an iterate: ambient-space bases (lifted through the
/// sketch for the stochastic strategy), the driving spectrum, and the stiff
/// dimension chosen by the variance split.
struct GeometryInfo {
  SubspacePartition partition;  // ambient, sloppy block pruned
  Vec eigenvalues;              // descending, all directions
  Mat eigenvectors;             // ambient, all directions (n x d)
  int k_s = 0;
  bool flat_region = false;
};

inline GeometryInfo build_geometry(Evaluator& ev, const Vec& theta,
                                   const HierarchicalConfig& cfg,
                                   std::uint64_t sketch_stream = 0) {
  const int n = ev.dimension();
  cfg.validate(n);
  ev.set_phase(Phase::Geometry);

  GeometryInfo geo;
  double h = cfg.fd_step;
  for (int attempt = 0; attempt < 2; ++attempt) {
    EigenSpectrum spectrum;
    Mat lift_basis;  // identity for the exact strategy
    if (cfg.strategy == Strategy::Exact) {
      const Mat jac = fd_jacobian(ev, theta, h);
      spectrum = eigendecompose(gauss_newton_hessian(jac, cfg.lambda_reg));
    } else {
      const std::uint64_t s =
          cfg.resample_sketch ? mix_seed(cfg.seed, sketch_stream) : mix_seed(cfg.seed, 0);
      const SketchBasis sketch = draw_sketch(n, cfg.sketch_k, s);
      const Mat y = directional_diffs(ev, theta, sketch.omega, h);
      spectrum = eigendecompose(reduced_hessian(y));
      lift_basis = sketch.omega;
    }
    const bool flat = spectrum.eigenvalues.maxCoeff() < 1e2 * cfg.lambda_reg;
    if (flat && attempt == 0) {
      geo.flat_region = true;  // retry once with a coarser probe step
      h *= 10.0;
      continue;
    }
    SubspacePartition part = partition_spectrum(spectrum, cfg.gamma, cfg.tau);
    geo.eigenvalues = spectrum.eigenvalues;
    geo.k_s = part.k_s;
    if (lift_basis.size() == 0) {
      geo.eigenvectors = spectrum.eigenvectors;
      geo.partition = std::move(part);
    } else {
      geo.eigenvectors = lift(lift_basis, spectrum.eigenvectors);
      part.stiff_basis = lift(lift_basis, part.stiff_basis);
      part.sloppy_basis = part.sloppy_basis.cols() > 0
                              ? lift(lift_basis, part.sloppy_basis)
                              : Mat(n, 0);
      geo.partition = std::move(part);
    }
    break;
  }
  return geo;
}

struct StepInfo {
  Vec theta_next;
  double loss_next = 0.0;
  Vec psi_star;  // sloppy coordinates found this step (post-realign basis)
  int stiff_evals = 0;
  int sloppy_evals = 0;
  bool stiff_fallback = false;  // stiff move discarded to preserve descent
  bool inner_budget_flag = false;
};

/// One application of the meta-step at theta under a fixed geometry:
/// stiff solve (with the carried-over sloppy offset inside the objective),
/// sloppy re-alignment, sloppy solve. Never increases the loss.
inline StepInfo step(Evaluator& ev, const Vec& theta, const GeometryInfo& geo,
                     const HierarchicalConfig& cfg, const Vec& psi_prev = Vec()) {
  const Mat& v_s = geo.partition.stiff_basis;
  Mat v_l = geo.partition.sloppy_basis;
  StepInfo info;

  // carried-over sloppy offset, truncated/padded if the retained dimension
  // changed between iterations
  Vec offset;
  const Eigen::Index q = std::min<Eigen::Index>(psi_prev.size(), v_l.cols());
  const bool has_offset = q > 0 && psi_prev.head(q).cwiseAbs().maxCoeff() > 0.0;
  if (has_offset) offset = v_l.leftCols(q) * psi_prev.head(q);

  const double f_theta = ev.loss(theta);

  // 1) stiff solve from phi = 0
  ev.set_phase(Phase::Stiff);
  InnerSolverOptions stiff_opts;
  stiff_opts.max_evals = cfg.stiff_evals_per_dim * static_cast<int>(v_s.cols());
  stiff_opts.x_tol = cfg.inner_x_tol;
  stiff_opts.f_tol = cfg.inner_f_tol;
  stiff_opts.initial_step = cfg.inner_step;
  auto stiff_objective = [&](const Vec& phi) {
    return has_offset ? ev.loss(theta + v_s * phi + offset) : ev.loss(theta + v_s * phi);
  };
  const SolveResult stiff = powell(stiff_objective, Vec::Zero(v_s.cols()), stiff_opts);
  info.stiff_evals = stiff.evals;
  info.inner_budget_flag |= stiff.budget_exhausted;

  // the offset enters the stiff objective but not the update; fall back to
  // phi = 0 if dropping it would break monotone descent
  Vec theta_mid = theta + v_s * stiff.x;
  double f_mid = ev.loss(theta_mid);
  if (f_mid > f_theta) {
    theta_mid = theta;
    f_mid = f_theta;
    info.stiff_fallback = true;
  }

  // 2) sloppy re-alignment: rotate the retained sloppy basis onto the local
  // curvature axes at the post-stiff point
  if (cfg.realign && v_l.cols() > 0) {
    ev.set_phase(Phase::Realign);
    const Mat y_l = directional_diffs(ev, theta_mid, v_l, cfg.fd_step);
    const EigenSpectrum rot = eigendecompose(reduced_hessian(y_l));
    v_l = lift(v_l, rot.eigenvectors);
  }

  // 3) sloppy solve from psi = 0
  info.theta_next = theta_mid;
  info.loss_next = f_mid;
  info.psi_star = Vec::Zero(v_l.cols());
  if (v_l.cols() > 0) {
    ev.set_phase(Phase::Sloppy);
    InnerSolverOptions sloppy_opts;
    sloppy_opts.max_evals = cfg.sloppy_evals_per_dim * static_cast<int>(v_l.cols());
    sloppy_opts.x_tol = cfg.inner_x_tol;
    sloppy_opts.f_tol = cfg.inner_f_tol;
    sloppy_opts.initial_step = cfg.inner_step;
    auto sloppy_objective = [&](const Vec& psi) { return ev.loss(theta_mid + v_l * psi); };
    const SolveResult sloppy = nelder_mead(sloppy_objective, Vec::Zero(v_l.cols()), sloppy_opts);
    info.sloppy_evals = sloppy.evals;
    info.inner_budget_flag |= sloppy.budget_exhausted;
    if (sloppy.f <= f_mid) {
      info.theta_next = theta_mid + v_l * sloppy.x;
      info.loss_next = sloppy.f;
      info.psi_star = sloppy.x;
    }
  }
  return info;
}

struct HierarchicalResult {
  Vec theta_final;
  double loss_final = 0.0;
  int iterations = 0;
  bool converged = false;
  bool budget_exhausted = false;
  long total_calls = 0;
  Vec final_eigenvalues;
  Mat final_eigenvectors;  // ambient
  int final_k_s = 0;
  SubspacePartition final_partition;  // ambient bases at the last geometry
  std::vector<double> misalignment_history;
  int flat_region_events = 0;
  int stiff_fallback_events = 0;
  OptimizationTrace trace;  // populated by the owning overload of run()
};

/// Core driver against a caller-owned evaluator/trace (the benchmark harness
/// shares both across optimizers). Budget exhaustion ends the run early with
/// the last completed iterate.
inline HierarchicalResult run_hierarchical(Evaluator& ev, OptimizationTrace& trace,
                                           const Vec& theta0, const HierarchicalConfig& cfg) {
  cfg.validate(ev.dimension());
  HierarchicalResult res;
  Vec theta = theta0;
  Vec psi_prev;
  std::optional<GeometryInfo> geo;
  Mat vs_prev;

  try {
    ev.set_phase(Phase::Init);
    res.loss_final = ev.loss(theta);
    res.theta_final = theta;

    geo = build_geometry(ev, theta, cfg, 0);
    res.flat_region_events += geo->flat_region ? 1 : 0;
    vs_prev = geo->partition.stiff_basis;

    for (int i = 1; i <= cfg.max_outer_iterations; ++i) {
      const StepInfo si = step(ev, theta, *geo, cfg, psi_prev);
      theta = si.theta_next;
      psi_prev = si.psi_star;
      res.theta_final = theta;
      res.loss_final = si.loss_next;
      res.iterations = i;
      res.stiff_fallback_events += si.stiff_fallback ? 1 : 0;

      GeometryInfo next = build_geometry(ev, theta, cfg, static_cast<std::uint64_t>(i));
      res.flat_region_events += next.flat_region ? 1 : 0;

      const bool dim_changed = vs_prev.cols() != next.partition.stiff_basis.cols();
      const double delta = misalignment(vs_prev, next.partition.stiff_basis);
      res.misalignment_history.push_back(delta);

      IterationDiagnostics diag;
      diag.iteration = i;
      diag.loss = si.loss_next;
      diag.misalignment = delta;
      diag.stiff_dim = next.k_s;
      diag.sloppy_dim = next.partition.sloppy_dim();
      diag.eigenvalues = next.eigenvalues;
      diag.cumulative_calls = ev.calls();
      trace.iterations.push_back(std::move(diag));

      geo = std::move(next);
      vs_prev = geo->partition.stiff_basis;

      double criterion = delta;
      const int w = cfg.misalignment_window;
      if (w > 1 && static_cast<int>(res.misalignment_history.size()) >= w) {
        double acc = 0.0;
        for (int j = 0; j < w; ++j)
          acc += res.misalignment_history[res.misalignment_history.size() - 1 - j];
        criterion = acc / w;
      }
      // a change of stiff dimension is itself a non-convergence event
      if (!dim_changed && criterion < cfg.eps_stop) {
        res.converged = true;
        break;
      }
    }
  } catch (const budget_exhausted_error&) {
    res.budget_exhausted = true;
  }

  if (geo.has_value()) {
    res.final_eigenvalues = geo->eigenvalues;
    res.final_eigenvectors = geo->eigenvectors;
    res.final_k_s = geo->k_s;
    res.final_partition = geo->partition;
  }
  res.total_calls = ev.calls();
  return res;
}

/// Owning overload: fresh evaluator and trace bound to the given problem.
inline HierarchicalResult run_hierarchical(const ResidualProblem& problem, const Vec& theta0,
                                           const HierarchicalConfig& cfg) {
  OptimizationTrace trace;
  Evaluator ev(problem, &trace);
  HierarchicalResult res = run_hierarchical(ev, trace, theta0, cfg);
  res.trace = std::move(trace);
  return res;
}

struct GradientDiagnostics {
  Vec gradient;          // forward-difference gradient at theta_final
  double grad_norm = 0.0;
  double stiff_fraction = 0.0;  // ||V_s^T g|| / ||g||
  double bound_rhs = 0.0;       // |lambda_max_sloppy| * ||dtheta_est||
  double lambda_max_sloppy = 0.0;
  Vec delta_theta_est;  // pseudo-inverse displacement estimate
};

/// Post-convergence check of the gradient bound: the converged gradient
/// should live in the sloppy subspace, with norm at most
/// |lambda_max_sloppy| times the estimated displacement to the minimum.
inline GradientDiagnostics gradient_diagnostics(Evaluator& ev, const HierarchicalResult& res,
                                                double h = 1e-7) {
  GradientDiagnostics diag;
  ev.set_phase(Phase::Geometry);
  diag.gradient = fd_gradient(ev, res.theta_final, h);
  diag.grad_norm = diag.gradient.norm();

  const Mat& v_all = res.final_eigenvectors;
  const Vec& lam = res.final_eigenvalues;
  const int d = static_cast<int>(lam.size());
  diag.delta_theta_est = Vec::Zero(res.theta_final.size());
  for (int j = 0; j < d; ++j) {
    if (lam[j] <= 0.0) continue;
    const double coeff = v_all.col(j).dot(diag.gradient) / lam[j];
    diag.delta_theta_est += coeff * v_all.col(j);
  }
  diag.lambda_max_sloppy = res.final_k_s < d ? std::abs(lam[res.final_k_s]) : 0.0;
  diag.bound_rhs = diag.lambda_max_sloppy * diag.delta_theta_est.norm();
  if (diag.grad_norm < 1e-14) {
    diag.stiff_fraction = 0.0;
  } else {
    const Mat v_s = v_all.leftCols(res.final_k_s);
    diag.stiff_fraction = (v_s.transpose() * diag.gradient).norm() / diag.grad_norm;
  }
  return diag;
}

inline GradientDiagnostics gradient_diagnostics(const ResidualProblem& problem,
                                                const HierarchicalResult& res, double h = 1e-7) {
  Evaluator ev(problem);
  return gradient_diagnostics(ev, res, h);
}

}  // namespace sloppyopt
