#pragma once
// Reference optimizers for the sample-efficiency comparison: differential
// evolution (best1bin), a finite-difference Levenberg-Marquardt local
// solver, and full-space Powell / Nelder-Mead wrappers. All share the same
// evaluation layer as the hierarchical driver so traces are comparable.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sloppyopt/core.hpp"
#include "sloppyopt/evaluator.hpp"
#include "sloppyopt/hessian.hpp"
#include "sloppyopt/solvers.hpp"

namespace sloppyopt {

struct DEConfig {
  int pop_size = 15;
  int max_generations = 90;
  double recombination = 0.7;
  double mutation_min = 0.5;  // F dithered per generation in [min, max]
  double mutation_max = 1.0;
  std::uint64_t seed = 0;
  bool polish = true;  // terminal Nelder-Mead refinement from the best member
  int polish_max_evals = 200;

  void validate() const {
    if (pop_size < 4) throw std::invalid_argument("DEConfig: best1bin needs pop_size >= 4");
    if (!(recombination >= 0.0 && recombination <= 1.0))
      throw std::invalid_argument("DEConfig: recombination in [0,1]");
    if (!(mutation_min <= mutation_max))
      throw std::invalid_argument("DEConfig: mutation range inverted");
  }
};

struct BaselineResult {
  Vec x;
  double f = std::numeric_limits<double>::infinity();
  long evals = 0;
  bool budget_exhausted = false;
};

/// best1bin differential evolution with bound clipping and deferred
/// selection in member order (trial evaluations are batchable). When x0 is
/// given it replaces the first population member, so every optimizer in a
/// comparison can share the same initial guess.
inline BaselineResult differential_evolution(Evaluator& ev, const BoundsBox& bounds,
                                             const DEConfig& cfg, const Vec& x0 = Vec()) {
  cfg.validate();
  const int n = ev.dimension();
  if (bounds.dim() != n) throw std::invalid_argument("differential_evolution: bounds dimension");
  ev.set_phase(Phase::Baseline);
  Rng rng(cfg.seed);

  BaselineResult out;
  const long calls0 = ev.calls();
  auto clip = [&](Vec x) {
    for (int i = 0; i < n; ++i) x[i] = std::clamp(x[i], bounds.lower[i], bounds.upper[i]);
    return x;
  };

  std::vector<Vec> pop(cfg.pop_size);
  std::vector<double> fit(cfg.pop_size);
  try {
    for (int i = 0; i < cfg.pop_size; ++i) {
      Vec x(n);
      for (int j = 0; j < n; ++j) x[j] = rng.uniform(bounds.lower[j], bounds.upper[j]);
      pop[i] = std::move(x);
    }
    if (x0.size() == n) pop[0] = clip(x0);
    out.x = pop[0];
    {
      const auto res = ev.residual_batch(pop);
      for (int i = 0; i < cfg.pop_size; ++i) fit[i] = guarded_objective(res[i]);
    }
    int best = 0;
    for (int i = 1; i < cfg.pop_size; ++i)
      if (fit[i] < fit[best]) best = i;
    out.x = pop[best];
    out.f = fit[best];

    for (int gen = 0; gen < cfg.max_generations; ++gen) {
      const double f_weight = rng.uniform(cfg.mutation_min, cfg.mutation_max);
      std::vector<Vec> trials(cfg.pop_size);
      for (int i = 0; i < cfg.pop_size; ++i) {
        // two distinct donors, both different from the target
        std::size_t r1 = rng.index(cfg.pop_size);
        while (static_cast<int>(r1) == i) r1 = rng.index(cfg.pop_size);
        std::size_t r2 = rng.index(cfg.pop_size);
        while (static_cast<int>(r2) == i || r2 == r1) r2 = rng.index(cfg.pop_size);
        const Vec mutant = pop[best] + f_weight * (pop[r1] - pop[r2]);
        Vec trial = pop[i];
        const std::size_t j_forced = rng.index(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
          if (rng.uniform() < cfg.recombination || static_cast<std::size_t>(j) == j_forced)
            trial[j] = mutant[j];
        trials[i] = clip(std::move(trial));
      }
      const auto res = ev.residual_batch(trials);
      for (int i = 0; i < cfg.pop_size; ++i) {
        const double ft = guarded_objective(res[i]);
        if (ft <= fit[i]) {
          pop[i] = trials[i];
          fit[i] = ft;
        }
      }
      best = 0;
      for (int i = 1; i < cfg.pop_size; ++i)
        if (fit[i] < fit[best]) best = i;
      if (fit[best] < out.f) {
        out.f = fit[best];
        out.x = pop[best];
      }
    }

    if (cfg.polish) {
      InnerSolverOptions opts;
      opts.max_evals = cfg.polish_max_evals;
      const SolveResult polish = nelder_mead(ev.loss_fn(), out.x, opts);
      if (polish.evals > 0 && polish.f < out.f) {
        out.x = polish.x;
        out.f = polish.f;
      }
    }
  } catch (const budget_exhausted_error&) {
    out.budget_exhausted = true;
  }
  out.evals = ev.calls() - calls0;
  return out;
}

struct LMConfig {
  double h = 1e-6;               // finite-difference step for the Jacobian
  double damping0 = 1e-3;        // initial Levenberg damping
  double damping_max = 1e12;
  int max_iterations = 200;
  double g_tol = 1e-12;          // stop on small gradient
  double step_tol = 1e-12;       // stop on small accepted step
};

/// Classic Levenberg-Marquardt on a finite-difference Jacobian. A rejected
/// step never updates the iterate; damping scales by 10 either way.
/// Iterates are clipped to the bounds after each accepted step.
inline BaselineResult levenberg_marquardt_fd(Evaluator& ev, const Vec& theta0,
                                             const BoundsBox& bounds, const LMConfig& cfg = {}) {
  const int n = ev.dimension();
  if (bounds.dim() != n) throw std::invalid_argument("levenberg_marquardt_fd: bounds dimension");
  ev.set_phase(Phase::Baseline);
  BaselineResult out;
  const long calls0 = ev.calls();
  auto clip = [&](Vec x) {
    for (int i = 0; i < n; ++i) x[i] = std::clamp(x[i], bounds.lower[i], bounds.upper[i]);
    return x;
  };
  try {
    Vec theta = clip(theta0);
    Vec r = ev.residual(theta);
    double f = guarded_objective(r);
    out.x = theta;
    out.f = f;
    double damping = cfg.damping0;
    for (int it = 0; it < cfg.max_iterations; ++it) {
      const Mat jac = directional_diffs(ev, theta, Mat::Identity(n, n), cfg.h);
      const Mat jtj = jac.transpose() * jac;
      const Vec g = jac.transpose() * r;
      if (g.cwiseAbs().maxCoeff() < cfg.g_tol) break;
      bool accepted = false;
      while (damping <= cfg.damping_max) {
        Mat lhs = jtj;
        lhs.diagonal().array() += damping;
        const Vec delta = lhs.ldlt().solve(-g);
        if (!delta.allFinite()) {
          damping *= 10.0;
          continue;
        }
        const Vec candidate = clip(theta + delta);
        const Vec r_new = ev.residual(candidate);
        const double f_new = guarded_objective(r_new);
        if (f_new < f) {
          theta = candidate;
          r = r_new;
          f = f_new;
          damping = std::max(damping / 10.0, 1e-14);
          accepted = true;
          if (f < out.f) {
            out.f = f;
            out.x = theta;
          }
          if (delta.norm() < cfg.step_tol) it = cfg.max_iterations;  // converged
          break;
        }
        damping *= 10.0;
      }
      if (!accepted) break;  // damping escalation exhausted
    }
  } catch (const budget_exhausted_error&) {
    out.budget_exhausted = true;
  }
  out.evals = ev.calls() - calls0;
  return out;
}

namespace detail {

template <typename Solver>
BaselineResult full_space_solve(Solver&& solver, Evaluator& ev, const Vec& theta0,
                                int max_evals, InnerSolverOptions opts) {
  ev.set_phase(Phase::Baseline);
  BaselineResult out;
  out.x = theta0;
  const long calls0 = ev.calls();
  opts.max_evals = max_evals;
  // keep the running best so a budget stop mid-solve still returns a point
  auto objective = [&](const Vec& x) {
    const double v = ev.loss(x);
    if (v < out.f) {
      out.f = v;
      out.x = x;
    }
    return v;
  };
  try {
    const SolveResult res = solver(objective, theta0, opts);
    out.budget_exhausted = res.budget_exhausted;
  } catch (const budget_exhausted_error&) {
    out.budget_exhausted = true;
  }
  out.evals = ev.calls() - calls0;
  return out;
}

}  // namespace detail

/// Full-parameter-space Powell baseline.
inline BaselineResult full_space_powell(Evaluator& ev, const Vec& theta0, int max_evals,
                                        const InnerSolverOptions& base_opts = {}) {
  return detail::full_space_solve(
      [](const std::function<double(const Vec&)>& f, const Vec& x0,
         const InnerSolverOptions& o) { return powell(f, x0, o); },
      ev, theta0, max_evals, base_opts);
}

/// Full-parameter-space Nelder-Mead baseline.
inline BaselineResult full_space_nelder_mead(Evaluator& ev, const Vec& theta0, int max_evals,
                                             const InnerSolverOptions& base_opts = {}) {
  return detail::full_space_solve(
      [](const std::function<double(const Vec&)>& f, const Vec& x0,
         const InnerSolverOptions& o) { return nelder_mead(f, x0, o); },
      ev, theta0, max_evals, base_opts);
}

}  // namespace sloppyopt
