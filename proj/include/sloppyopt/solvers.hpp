#pragma once
// Derivative-free minimizers used both as hierarchical inner solvers and as
// full-space baselines: Powell's direction-set method (bracketing plus
// Brent line minimization) and the Nelder-Mead simplex. Both are
// deterministic, keep exact evaluation counts, and return the best point
// seen when their budget runs out.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sloppyopt/core.hpp"

namespace sloppyopt {

struct InnerSolverOptions {
  int max_evals = 1000;
  double x_tol = 1e-6;
  double f_tol = 1e-6;
  double initial_step = 0.05;  // normalized coordinates make this meaningful
};

struct SolveResult {
  Vec x;
  double f = 0.0;
  int evals = 0;
  bool budget_exhausted = false;
};

namespace detail {

struct EvalLimitReached {};

/// Counts objective calls, tracks the best point seen, raises once the
/// configured budget is hit.
class CountedObjective {
 public:
  CountedObjective(const std::function<double(const Vec&)>& f, int max_evals)
      : f_(f), max_evals_(max_evals) {}

  double operator()(const Vec& x) {
    if (evals_ >= max_evals_) throw EvalLimitReached{};
    ++evals_;
    const double v = f_(x);
    if (evals_ == 1 || v < best_f_) {
      best_f_ = v;
      best_x_ = x;
    }
    return v;
  }

  int evals() const { return evals_; }
  const Vec& best_x() const { return best_x_; }
  double best_f() const { return best_f_; }

 private:
  const std::function<double(const Vec&)>& f_;
  int max_evals_;
  int evals_ = 0;
  Vec best_x_;
  double best_f_ = std::numeric_limits<double>::infinity();
};

/// Brackets a 1-d minimum by golden-ratio expansion starting from
/// (0, step). f0 is the already-known value at t = 0.
struct Bracket {
  double a, b, c;
  double fb;
};

template <typename F1>
Bracket bracket_minimum(F1&& g, double f0, double step) {
  constexpr double kGold = 1.618033988749895;
  double a = 0.0, fa = f0;
  double b = step, fb = g(b);
  if (fb > fa) {
    // try the other side before conceding the bracket (a-step, 0, step)
    const double fm = g(-step);
    if (fm >= fa) return Bracket{-step, 0.0, step, fa};
    b = -step;
    fb = fm;
  }
  double c = b + kGold * (b - a);
  double fc = g(c);
  int guard = 0;
  while (fc < fb && guard++ < 60) {
    a = b;
    fa = fb;
    b = c;
    fb = fc;
    c = b + kGold * (b - a);
    fc = g(c);
  }
  (void)fa;
  return a < c ? Bracket{a, b, c, fb} : Bracket{c, b, a, fb};
}

/// Brent's parabolic/golden-section minimization on a bracketed interval.
template <typename F1>
std::pair<double, double> brent_minimize(F1&& g, const Bracket& br, int max_iter = 80) {
  constexpr double kCGold = 0.3819660112501051;
  constexpr double kZeps = 1e-12;
  constexpr double kTolRel = 1e-8;
  double a = br.a, b = br.c;
  double x = br.b, w = br.b, v = br.b;
  double fx = br.fb, fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const double xm = 0.5 * (a + b);
    const double tol1 = kTolRel * std::abs(x) + kZeps;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_old = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_old) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (xm >= x) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= xm) ? a - x : b - x;
      d = kCGold * e;
    }
    const double u = (std::abs(d) >= tol1) ? x + d : x + (d >= 0 ? tol1 : -tol1);
    const double fu = g(u);
    if (fu <= fx) {
      if (u >= x)
        a = x;
      else
        b = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      if (u < x)
        a = u;
      else
        b = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  return {x, fx};
}

/// Minimizes f from p along direction u; returns the new point and value.
inline std::pair<Vec, double> line_minimize(CountedObjective& f, const Vec& p, const Vec& u,
                                            double fp, double step) {
  auto g = [&](double t) { return f(p + t * u); };
  const Bracket br = bracket_minimum(g, fp, step);
  auto [t_star, f_star] = brent_minimize(g, br);
  if (f_star > fp) return {p, fp};  // numerical no-improvement: stay put
  return {p + t_star * u, f_star};
}

}  // namespace detail

/// Powell's method: successive line minimizations along an adaptively
/// updated direction set (direction-replacement rule). No gradients.
inline SolveResult powell(const std::function<double(const Vec&)>& f, const Vec& x0,
                          const InnerSolverOptions& opts) {
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw std::invalid_argument("powell: empty start point");
  detail::CountedObjective cf(f, opts.max_evals);
  SolveResult out;
  out.x = x0;
  try {
    Mat dirs = Mat::Identity(n, n);
    Vec p = x0;
    double fret = cf(p);
    Vec pt = p;  // iteration start point
    const int max_outer = 200;
    for (int iter = 0; iter < max_outer; ++iter) {
      const double f0 = fret;
      double biggest_drop = 0.0;
      int ibig = 0;
      for (int i = 0; i < n; ++i) {
        const double f_before = fret;
        std::tie(p, fret) = detail::line_minimize(cf, p, dirs.col(i), fret, opts.initial_step);
        if (f_before - fret > biggest_drop) {
          biggest_drop = f_before - fret;
          ibig = i;
        }
      }
      if (2.0 * (f0 - fret) <= opts.f_tol * (std::abs(f0) + std::abs(fret)) + 1e-25) break;
      if ((p - pt).cwiseAbs().maxCoeff() < opts.x_tol && iter > 0) break;
      // Powell's update: try the extrapolated point and, when profitable,
      // replace the direction of largest decrease with the net move.
      const Vec extrapolated = 2.0 * p - pt;
      const Vec net_move = p - pt;
      pt = p;
      const double f_extrap = cf(extrapolated);
      if (f_extrap < f0) {
        const double t = 2.0 * (f0 - 2.0 * fret + f_extrap) *
                             (f0 - fret - biggest_drop) * (f0 - fret - biggest_drop) -
                         biggest_drop * (f0 - f_extrap) * (f0 - f_extrap);
        if (t < 0.0 && net_move.norm() > 0.0) {
          const Vec new_dir = net_move.normalized();
          std::tie(p, fret) = detail::line_minimize(cf, p, new_dir, fret, opts.initial_step);
          dirs.col(ibig) = dirs.col(n - 1);
          dirs.col(n - 1) = new_dir;
        }
      }
    }
  } catch (const detail::EvalLimitReached&) {
    out.budget_exhausted = true;
  }
  out.evals = cf.evals();
  if (cf.evals() > 0) {
    out.x = cf.best_x();
    out.f = cf.best_f();
  } else {
    out.f = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

/// Nelder-Mead simplex with reflection/expansion/contraction/shrink
/// coefficients (1, 2, 0.5, 0.5). A degenerate simplex triggers one restart
/// around the best vertex before giving up.
inline SolveResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0,
                               const InnerSolverOptions& opts) {
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw std::invalid_argument("nelder_mead: empty start point");
  constexpr double kAlpha = 1.0, kGamma = 2.0, kRho = 0.5, kSigma = 0.5;
  detail::CountedObjective cf(f, opts.max_evals);
  SolveResult out;
  out.x = x0;

  std::vector<Vec> v;
  std::vector<double> fv;
  std::vector<int> order(n + 1);
  auto build_simplex = [&](const Vec& center) {
    v.assign(1, center);
    for (int i = 0; i < n; ++i) v.push_back(center + opts.initial_step * Vec::Unit(n, i));
    fv.clear();
    for (const auto& vertex : v) fv.push_back(cf(vertex));
  };
  auto sort_vertices = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fv[a] < fv[b]; });
  };

  try {
    build_simplex(x0);
    bool restarted = false;
    while (true) {
      sort_vertices();
      const int best = order[0], worst = order[n], second_worst = order[n - 1];
      const double spread = fv[worst] - fv[best];
      if (spread <= opts.f_tol * (std::abs(fv[best]) + std::abs(fv[worst])) + 1e-300) break;
      double diameter = 0.0;
      for (int i = 1; i <= n; ++i)
        diameter = std::max(diameter, (v[order[i]] - v[best]).cwiseAbs().maxCoeff());
      if (diameter <= opts.x_tol) break;
      if (diameter <= 1e-13 * std::max(1.0, v[best].cwiseAbs().maxCoeff())) {
        // simplex collapsed without meeting the f tolerance
        if (restarted) {
          out.budget_exhausted = true;
          break;
        }
        restarted = true;
        const Vec center = v[best];
        build_simplex(center);
        continue;
      }

      Vec centroid = Vec::Zero(n);
      for (int i = 0; i < n; ++i) centroid += v[order[i]];
      centroid /= n;

      const Vec xr = centroid + kAlpha * (centroid - v[worst]);
      const double fr = cf(xr);
      if (fr < fv[best]) {
        const Vec xe = centroid + kGamma * (centroid - v[worst]);
        const double fe = cf(xe);
        if (fe < fr) {
          v[worst] = xe;
          fv[worst] = fe;
        } else {
          v[worst] = xr;
          fv[worst] = fr;
        }
      } else if (fr < fv[second_worst]) {
        v[worst] = xr;
        fv[worst] = fr;
      } else if (fr < fv[worst]) {
        const Vec xc = centroid + kRho * (xr - centroid);  // outside contraction
        const double fc = cf(xc);
        if (fc <= fr) {
          v[worst] = xc;
          fv[worst] = fc;
        } else {
          for (int i = 1; i <= n; ++i) {  // shrink toward best
            v[order[i]] = v[best] + kSigma * (v[order[i]] - v[best]);
            fv[order[i]] = cf(v[order[i]]);
          }
        }
      } else {
        const Vec xcc = centroid - kRho * (centroid - v[worst]);  // inside contraction
        const double fcc = cf(xcc);
        if (fcc < fv[worst]) {
          v[worst] = xcc;
          fv[worst] = fcc;
        } else {
          for (int i = 1; i <= n; ++i) {
            v[order[i]] = v[best] + kSigma * (v[order[i]] - v[best]);
            fv[order[i]] = cf(v[order[i]]);
          }
        }
      }
    }
  } catch (const detail::EvalLimitReached&) {
    out.budget_exhausted = true;
  }
  out.evals = cf.evals();
  if (cf.evals() > 0) {
    out.x = cf.best_x();
    out.f = cf.best_f();
  } else {
    out.f = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace sloppyopt
