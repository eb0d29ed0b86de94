#pragma once
// Curvature extraction from residual probes: forward-difference Jacobians,
// the Gauss-Newton Hessian J^T J (+ Tikhonov term), and the implicit reduced
// Hessian (J*Omega)^T (J*Omega) built from directional probes along a random
// orthonormal sketch.

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sloppyopt/core.hpp"
#include "sloppyopt/evaluator.hpp"

namespace sloppyopt {

/// Column-orthonormal random subspace basis, reproducible from its seed.
struct SketchBasis {
  Mat omega;  // n x k, omega^T omega = I_k
  int k = 0;
  std::uint64_t seed = 0;
};

/// Probe results along a basis: Y ~= J * basis, plus the reduced curvature
/// matrix Y^T Y and the shared base residual.
struct CurvatureEstimate {
  Mat Y;
  Mat H_small;
  Vec base_residual;
};

/// Gaussian n x k matrix orthonormalized by QR. Isotropic by rotation
/// invariance of the Gaussian ensemble.
inline SketchBasis draw_sketch(int n, int k, std::uint64_t seed) {
  if (k < 1 || k > n) throw std::invalid_argument("draw_sketch: need 1 <= k <= n");
  Rng rng(seed);
  Mat g(n, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < n; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(n, k);
  return SketchBasis{std::move(q), k, seed};
}

/// Columns (r(theta + h*basis_j) - r(theta)) / h. Spends p+1 simulator calls
/// when nothing is cached; the base residual is shared across columns.
inline Mat directional_diffs(Evaluator& ev, const Vec& theta, const Mat& basis, double h) {
  if (h <= 0.0) throw std::invalid_argument("directional_diffs: h must be > 0");
  if (basis.rows() != theta.size())
    throw std::invalid_argument("directional_diffs: basis row count != dimension");
  const int p = static_cast<int>(basis.cols());
  std::vector<Vec> points;
  points.reserve(p + 1);
  points.push_back(theta);
  for (int j = 0; j < p; ++j) points.push_back(theta + h * basis.col(j));
  const auto res = ev.residual_batch(points);
  const Vec& base = res.front();
  Mat y(base.size(), p);
  for (int j = 0; j < p; ++j) {
    Vec col = (res[j + 1] - base) / h;
    // a failed probe carries no curvature information
    if (!col.allFinite()) col.setZero();
    y.col(j) = col;
  }
  return y;
}

/// Forward-difference Jacobian: exactly n+1 simulator calls on a fresh point.
inline Mat fd_jacobian(Evaluator& ev, const Vec& theta, double h) {
  return directional_diffs(ev, theta, Mat::Identity(theta.size(), theta.size()), h);
}

/// Convenience overloads for callers without an evaluation context.
inline Mat fd_jacobian(const ResidualProblem& problem, const Vec& theta, double h) {
  Evaluator ev(problem);
  return fd_jacobian(ev, theta, h);
}

/// H = J^T J + lambda_reg * I, symmetrized against round-off.
inline Mat gauss_newton_hessian(const Mat& jacobian, double lambda_reg) {
  if (lambda_reg < 0.0) throw std::invalid_argument("gauss_newton_hessian: lambda_reg < 0");
  Mat h = jacobian.transpose() * jacobian;
  h = 0.5 * (h + h.transpose());
  h.diagonal().array() += lambda_reg;
  return h;
}

/// H_small = Y^T Y (unregularized; the sketch-space eigensolve is symmetric).
inline Mat reduced_hessian(const Mat& y) {
  Mat h = y.transpose() * y;
  return 0.5 * (h + h.transpose());
}

/// One-shot reduced-curvature probe at theta along a sketch basis.
inline CurvatureEstimate sketch_curvature(Evaluator& ev, const Vec& theta,
                                          const SketchBasis& sketch, double h) {
  CurvatureEstimate est;
  est.base_residual = ev.residual(theta);
  est.Y = directional_diffs(ev, theta, sketch.omega, h);
  est.H_small = reduced_hessian(est.Y);
  return est;
}

/// Forward-difference gradient of the loss, n+1 calls on a fresh point.
inline Vec fd_gradient(Evaluator& ev, const Vec& theta, double h) {
  if (h <= 0.0) throw std::invalid_argument("fd_gradient: h must be > 0");
  const int n = static_cast<int>(theta.size());
  std::vector<Vec> points;
  points.reserve(n + 1);
  points.push_back(theta);
  for (int i = 0; i < n; ++i) points.push_back(theta + h * Vec::Unit(n, i));
  const auto res = ev.residual_batch(points);
  const double f0 = guarded_objective(res.front());
  Vec g(n);
  for (int i = 0; i < n; ++i) g[i] = (guarded_objective(res[i + 1]) - f0) / h;
  return g;
}

}  // namespace sloppyopt
