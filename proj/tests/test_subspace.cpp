#include <catch2/catch.hpp>

#include <cmath>

#include "sloppyopt/hessian.hpp"
#include "sloppyopt/subspace.hpp"

using namespace sloppyopt;

TEST_CASE("eigendecompose sorts descending with a fixed sign convention", "[subspace]") {
  Mat d(2, 2);
  d << 3, 0, 0, 1;
  const EigenSpectrum s = eigendecompose(d);
  CHECK(s.eigenvalues[0] == Approx(3.0));
  CHECK(s.eigenvalues[1] == Approx(1.0));
  REQUIRE((s.eigenvectors - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  Mat m(2, 2);
  m << 2, 1, 1, 2;
  const EigenSpectrum s2 = eigendecompose(m);
  CHECK(s2.eigenvalues[0] == Approx(3.0));
  CHECK(s2.eigenvalues[1] == Approx(1.0));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(s2.eigenvectors(0, 0) == Approx(inv_sqrt2));
  CHECK(s2.eigenvectors(1, 0) == Approx(inv_sqrt2));
}

TEST_CASE("eigendecompose reconstructs random PSD matrices", "[subspace]") {
  Rng rng(9);
  Mat j(14, 10);
  for (int i = 0; i < 14; ++i)
    for (int k = 0; k < 10; ++k) j(i, k) = rng.normal();
  const Mat h = gauss_newton_hessian(j, 0.0);
  const EigenSpectrum s = eigendecompose(h);
  const Mat rebuilt = s.eigenvectors * s.eigenvalues.asDiagonal() * s.eigenvectors.transpose();
  REQUIRE((rebuilt - h).cwiseAbs().maxCoeff() < 1e-8 * h.cwiseAbs().maxCoeff());
  REQUIRE((s.eigenvectors.transpose() * s.eigenvectors - Mat::Identity(10, 10))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
}

TEST_CASE("eigendecompose rejects non-symmetric input", "[subspace]") {
  Mat m(2, 2);
  m << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(eigendecompose(m), std::invalid_argument);
}

TEST_CASE("split_stiff follows the cumulative variance rule", "[subspace]") {
  Vec a(3);
  a << 0.9, 0.05, 0.05;
  CHECK(split_stiff(a, 0.90) == 1);
  Vec b(3);
  b << 0.5, 0.4, 0.1;
  CHECK(split_stiff(b, 0.90) == 2);
  CHECK(split_stiff(b, 1.0) == 3);
  CHECK_THROWS_AS(split_stiff(Vec::Zero(3), 0.9), std::invalid_argument);
  CHECK_THROWS_AS(split_stiff(a, 0.0), std::invalid_argument);
}

TEST_CASE("split_stiff is monotone in gamma", "[subspace]") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    Vec lambda(8);
    for (int i = 0; i < 8; ++i) lambda[i] = std::pow(10.0, rng.uniform(-6.0, 0.0));
    std::sort(lambda.data(), lambda.data() + 8, std::greater<double>());
    int prev = 0;
    for (double gamma : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1.0}) {
      const int k = split_stiff(lambda, gamma);
      REQUIRE(k >= prev);
      prev = k;
    }
  }
}

TEST_CASE("prune_sloppy keeps the leader and thresholds the rest", "[subspace]") {
  Vec lambda(4);
  lambda << 1.0, 1e-3, 1e-5, 1e-9;
  const auto keep = prune_sloppy(lambda, 1, 1e-4);
  REQUIRE(keep == std::vector<int>{1, 2});  // 1e-9 < 1e-4 * 1e-3

  Vec equal(5);
  equal << 1.0, 0.2, 0.2, 0.2, 0.2;
  CHECK(prune_sloppy(equal, 1, 1e-4).size() == 4);

  CHECK(prune_sloppy(lambda, 4, 1e-4).empty());
  CHECK_THROWS_AS(prune_sloppy(lambda, 1, 0.0), std::invalid_argument);
}

TEST_CASE("prune_sloppy is invariant to uniform spectrum scaling", "[subspace]") {
  Rng rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    Vec lambda(7);
    for (int i = 0; i < 7; ++i) lambda[i] = std::pow(10.0, rng.uniform(-8.0, 0.0));
    std::sort(lambda.data(), lambda.data() + 7, std::greater<double>());
    const auto base = prune_sloppy(lambda, 2, 1e-4);
    for (double scale : {1e-6, 3.0, 1e8}) {
      REQUIRE(prune_sloppy((scale * lambda).eval(), 2, 1e-4) == base);
    }
  }
}

TEST_CASE("lift preserves orthonormality", "[subspace]") {
  const SketchBasis omega = draw_sketch(8, 4, 2);
  const SketchBasis inner = draw_sketch(4, 3, 7);
  CHECK((lift(Mat::Identity(4, 4), inner.omega) - inner.omega).cwiseAbs().maxCoeff() == 0.0);
  CHECK((lift(omega.omega, Mat::Identity(4, 4)) - omega.omega).cwiseAbs().maxCoeff() == 0.0);
  const Mat v = lift(omega.omega, inner.omega);
  REQUIRE((v.transpose() * v - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(lift(omega.omega, Mat::Identity(5, 5)), std::invalid_argument);
}

TEST_CASE("misalignment of identical and orthogonal subspaces", "[subspace]") {
  const SketchBasis v = draw_sketch(6, 2, 19);
  CHECK(misalignment(v.omega, v.omega) == Approx(0.0).margin(1e-12));

  Mat e1(2, 1), e2(2, 1);
  e1 << 1, 0;
  e2 << 0, 1;
  CHECK(misalignment(e1, e2) == Approx(1.0));
  CHECK_THROWS_AS(misalignment(Mat(3, 0), e1), std::invalid_argument);
}

TEST_CASE("misalignment of a rotated line is 1 - cos(angle)", "[subspace]") {
  for (double alpha : {0.05, 0.3, 1.0, 1.5}) {
    Mat a(2, 1), b(2, 1);
    a << 1, 0;
    b << std::cos(alpha), std::sin(alpha);
    REQUIRE(misalignment(a, b) == Approx(1.0 - std::cos(alpha)).epsilon(1e-10));
  }
}

TEST_CASE("misalignment measures subspaces, not bases", "[subspace]") {
  Rng rng(71);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat v1 = draw_sketch(7, 3, 100 + trial).omega;
    const Mat v2 = draw_sketch(7, 3, 200 + trial).omega;
    const double d = misalignment(v1, v2);
    REQUIRE(misalignment(v2, v1) == Approx(d).epsilon(1e-10));
    // right-multiplying by an orthogonal matrix re-expresses the same space
    const Mat q = draw_sketch(3, 3, 300 + trial).omega;
    REQUIRE(misalignment((v1 * q).eval(), v2) == Approx(d).epsilon(1e-9));
  }
  (void)rng;
}

TEST_CASE("misalignment with mismatched dimensions uses the shared angles", "[subspace]") {
  const Mat v3 = draw_sketch(8, 3, 5).omega;
  Mat v2 = v3.leftCols(2);
  CHECK(misalignment(v3, v2) == Approx(0.0).margin(1e-10));
}

TEST_CASE("partition_spectrum assembles orthonormal stiff and sloppy bases", "[subspace]") {
  Vec lambda(5);
  lambda << 1.0, 0.08, 1e-3, 1e-6, 1e-12;
  Mat basis = draw_sketch(5, 5, 13).omega;
  EigenSpectrum s{lambda, basis};
  const SubspacePartition part = partition_spectrum(s, 0.90, 1e-4);
  CHECK(part.k_s == 1);
  CHECK(part.stiff_dim() == 1);
  CHECK(part.sloppy_dim() == 2);  // 1e-6 and 1e-12 fall below 1e-4 * 0.08
  Mat all(5, part.stiff_dim() + part.sloppy_dim());
  all << part.stiff_basis, part.sloppy_basis;
  REQUIRE((all.transpose() * all - Mat::Identity(all.cols(), all.cols()))
              .cwiseAbs()
              .maxCoeff() < 1e-8);
}
