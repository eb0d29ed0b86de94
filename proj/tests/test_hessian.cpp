#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sloppyopt/evaluator.hpp"
#include "sloppyopt/hessian.hpp"
#include "sloppyopt/models.hpp"
#include "sloppyopt/subspace.hpp"
#include "test_helpers.hpp"

using namespace sloppyopt;
using sloppyopt::testing::ConstantProblem;
using sloppyopt::testing::LinearProblem;
using sloppyopt::testing::SquareProblem;

TEST_CASE("fd_jacobian is exact on linear residuals", "[hessian]") {
  PrescribedSpectrumQuadratic quad(5, 9, 1.0, 21);
  const Vec theta = Vec::Constant(5, 0.3);
  for (double h : {1e-4, 1e-5, 1e-6}) {
    const Mat jac = fd_jacobian(quad, theta, h);
    REQUIRE((jac - quad.design_matrix()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("fd_jacobian of a constant residual is zero", "[hessian]") {
  ConstantProblem problem(3, Vec::Constant(4, 2.5));
  const Mat jac = fd_jacobian(problem, Vec::Constant(3, 0.5), 1e-6);
  CHECK(jac.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward differences carry the O(h) bias on r_j = theta_j^2", "[hessian]") {
  SquareProblem problem(3);
  const double h = 1e-6;
  const Mat jac = fd_jacobian(problem, Vec::Zero(3), h);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j)
        REQUIRE(jac(i, j) == Approx(h).epsilon(1e-9));
      else
        REQUIRE(jac(i, j) == 0.0);
    }
}

TEST_CASE("jacobian probes spend exactly n+1 calls", "[hessian]") {
  PrescribedSpectrumQuadratic quad(7, 10, 1.0, 3);
  Evaluator ev(quad);
  fd_jacobian(ev, Vec::Constant(7, 0.4), 1e-6);
  CHECK(quad.call_count() == 8);

  PrescribedSpectrumQuadratic quad2(7, 10, 1.0, 3);
  Evaluator ev2(quad2);
  const SketchBasis sketch = draw_sketch(7, 3, 99);
  directional_diffs(ev2, Vec::Constant(7, 0.4), sketch.omega, 1e-6);
  CHECK(quad2.call_count() == 4);
}

TEST_CASE("gauss_newton_hessian arithmetic", "[hessian]") {
  CHECK((gauss_newton_hessian(Mat::Identity(2, 2), 0.0) - Mat::Identity(2, 2))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  Mat j(2, 2);
  j << 1, 0, 0, 0;
  const Mat h = gauss_newton_hessian(j, 1e-6);
  CHECK(h(0, 0) == Approx(1.0 + 1e-6));
  CHECK(h(1, 1) == Approx(1e-6));
  CHECK(h(0, 1) == 0.0);
  CHECK_THROWS_AS(gauss_newton_hessian(j, -1.0), std::invalid_argument);
}

TEST_CASE("gauss_newton_hessian is symmetric PSD with a spectral floor", "[hessian]") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Mat j(6, 4);
    for (int i = 0; i < 6; ++i)
      for (int k = 0; k < 4; ++k) j(i, k) = rng.normal();
    const double lambda_reg = 1e-6;
    const Mat h = gauss_newton_hessian(j, lambda_reg);
    REQUIRE((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    const EigenSpectrum s = eigendecompose(h);
    REQUIRE(s.eigenvalues.minCoeff() >= lambda_reg - 1e-10);
  }
}

TEST_CASE("draw_sketch produces an orthonormal reproducible basis", "[hessian]") {
  const SketchBasis full = draw_sketch(4, 4, 11);
  REQUIRE((full.omega.transpose() * full.omega - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() <
          1e-10);

  const SketchBasis one = draw_sketch(2, 1, 5);
  CHECK(one.omega.col(0).norm() == Approx(1.0).epsilon(1e-12));

  const SketchBasis again = draw_sketch(4, 4, 11);
  CHECK(full.omega == again.omega);
  const SketchBasis other = draw_sketch(4, 4, 12);
  CHECK(full.omega != other.omega);

  CHECK_THROWS_AS(draw_sketch(3, 4, 0), std::invalid_argument);
  CHECK_THROWS_AS(draw_sketch(3, 0, 0), std::invalid_argument);
}

TEST_CASE("random sketches capture k/n of a fixed direction on average", "[hessian]") {
  // Monte-Carlo oracle for the expected squared overlap law
  const int n = 29, k = 18, trials = 2000;
  Vec target = Vec::Zero(n);
  target[4] = 1.0;
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    const SketchBasis sketch = draw_sketch(n, k, 500 + t);
    const double overlap = (sketch.omega.transpose() * target).squaredNorm();
    sum += overlap;
    sum_sq += overlap * overlap;
  }
  const double mean = sum / trials;
  const double var = sum_sq / trials - mean * mean;
  const double se = std::sqrt(var / trials);
  const double expected = static_cast<double>(k) / n;
  CHECK(std::abs(mean - expected) < 3.0 * se);
  CHECK(mean == Approx(0.6207).margin(0.02));
}

TEST_CASE("directional_diffs equals the exact matrix product on linear models", "[hessian]") {
  PrescribedSpectrumQuadratic quad(6, 10, 1.0, 8);
  const SketchBasis sketch = draw_sketch(6, 3, 77);
  Evaluator ev(quad);
  const Mat y = directional_diffs(ev, Vec::Constant(6, 0.4), sketch.omega, 1e-6);
  const Mat exact = quad.design_matrix() * sketch.omega;
  REQUIRE((y - exact).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("directional_diffs along unit vectors matches fd_jacobian bit-for-bit", "[hessian]") {
  PrescribedSpectrumQuadratic quad(4, 8, 1.0, 15);
  const Vec theta = Vec::Constant(4, 0.6);
  Evaluator ev1(quad), ev2(quad);
  const Mat a = fd_jacobian(ev1, theta, 1e-6);
  const Mat b = directional_diffs(ev2, theta, Mat::Identity(4, 4), 1e-6);
  CHECK(a == b);
}

TEST_CASE("a null direction of the model yields a zero probe column", "[hessian]") {
  Mat a(2, 3);
  a << 1, 0, 0, 0, 1, 0;  // e3 is in the null space
  LinearProblem problem(a, Vec::Zero(2));
  Evaluator ev(problem, nullptr, /*reflect=*/false);
  Mat basis(3, 1);
  basis << 0, 0, 1;
  const Mat y = directional_diffs(ev, Vec::Constant(3, 0.2), basis, 1e-6);
  CHECK(y.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("linear-model probes are h-independent", "[hessian]") {
  PrescribedSpectrumQuadratic quad(5, 8, 0.5, 33);
  const SketchBasis sketch = draw_sketch(5, 2, 3);
  const Mat exact = quad.design_matrix() * sketch.omega;
  const double scale = exact.cwiseAbs().maxCoeff();
  for (double h : {1e-8, 1e-6, 1e-4, 1e-2}) {
    Evaluator ev(quad);
    const Mat y = directional_diffs(ev, Vec::Constant(5, 0.45), sketch.omega, h);
    REQUIRE((y - exact).cwiseAbs().maxCoeff() / scale < 1e-8);
  }
}

TEST_CASE("reduced_hessian equals the full Hessian under an identity sketch", "[hessian]") {
  PrescribedSpectrumQuadratic quad(4, 8, 1.0, 5);
  Evaluator ev(quad);
  const Mat y = directional_diffs(ev, Vec::Constant(4, 0.3), Mat::Identity(4, 4), 1e-6);
  const Mat h_small = reduced_hessian(y);
  const Mat h_full = gauss_newton_hessian(quad.design_matrix(), 0.0);
  REQUIRE((h_small - h_full).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("reduced_hessian of orthogonal columns is diagonal", "[hessian]") {
  Mat y(4, 2);
  y << 3, 0, 0, 4, 0, 0, 0, 0;
  const Mat h = reduced_hessian(y);
  CHECK(h(0, 0) == Approx(9.0));
  CHECK(h(1, 1) == Approx(16.0));
  CHECK(h(0, 1) == 0.0);
}

TEST_CASE("rank-18 sketches recover the top eigenvalue within 15 percent", "[hessian]") {
  // dense eigensolve oracle on the exact Gauss-Newton Hessian. The
  // compression loses a factor ~k/n of a dominated top eigenvalue, so the
  // 15% recovery regime is a gently decaying spectrum.
  PrescribedSpectrumQuadratic quad(29, 58, 0.01, 44);
  const double lambda_top = eigendecompose(quad.exact_hessian()).eigenvalues[0];
  std::vector<double> errors;
  for (int seed = 0; seed < 20; ++seed) {
    const SketchBasis sketch = draw_sketch(29, 18, 900 + seed);
    Evaluator ev(quad);
    const Mat y = directional_diffs(ev, Vec::Constant(29, 0.5), sketch.omega, 1e-6);
    const double top_small = eigendecompose(reduced_hessian(y)).eigenvalues[0];
    errors.push_back(std::abs(top_small - lambda_top) / lambda_top);
  }
  std::sort(errors.begin(), errors.end());
  CHECK(errors[errors.size() / 2] < 0.15);
}

TEST_CASE("sketch-space eigenvalues interlace the full spectrum", "[hessian]") {
  Rng rng(23);
  for (int trial = 0; trial < 15; ++trial) {
    Mat j(10, 6);
    for (int i = 0; i < 10; ++i)
      for (int k = 0; k < 6; ++k) j(i, k) = rng.normal();
    const Mat h_full = gauss_newton_hessian(j, 0.0);
    const EigenSpectrum full = eigendecompose(h_full);
    const SketchBasis sketch = draw_sketch(6, 3, 40 + trial);
    const EigenSpectrum small =
        eigendecompose((sketch.omega.transpose() * h_full * sketch.omega).eval());
    REQUIRE(small.eigenvalues.maxCoeff() <= full.eigenvalues.maxCoeff() + 1e-10);
    REQUIRE(small.eigenvalues.minCoeff() >= full.eigenvalues.minCoeff() - 1e-10);
  }
}
