#include <catch2/catch.hpp>

#include <cmath>

#include "sloppyopt/models.hpp"
#include "sloppyopt/uncertainty.hpp"

using namespace sloppyopt;

TEST_CASE("diagonal case has the closed-form half-widths", "[uncertainty]") {
  Mat h(2, 2);
  h << 1.0, 0.0, 0.0, 100.0;
  const UncertaintyReport report = parameter_uncertainty(h, 1.0, 0.01);
  CHECK(std::abs(report.delta_theta[0] - std::sqrt(0.02)) < 1e-12);
  CHECK(std::abs(report.delta_theta[1] - std::sqrt(0.0002)) < 1e-12);
  CHECK(report.delta_phi_threshold == Approx(0.01));
  CHECK_FALSE(report.singular);
}

TEST_CASE("half-widths scale as the square root of the loss", "[uncertainty]") {
  Rng rng(13);
  Mat j(6, 4);
  for (int i = 0; i < 6; ++i)
    for (int k = 0; k < 4; ++k) j(i, k) = rng.normal();
  const Mat h = j.transpose() * j + 0.1 * Mat::Identity(4, 4);
  const UncertaintyReport base = parameter_uncertainty(h, 1.0);
  const UncertaintyReport scaled = parameter_uncertainty(h, 4.0);
  for (int i = 0; i < 4; ++i)
    REQUIRE(scaled.delta_theta[i] == Approx(2.0 * base.delta_theta[i]).epsilon(1e-12));
}

TEST_CASE("half-widths order like the inverse spectrum on aligned axes", "[uncertainty]") {
  PrescribedSpectrumQuadratic quad(6, 12, 1.0, 3, /*axis_aligned=*/true);
  const UncertaintyReport report = parameter_uncertainty(quad.exact_hessian(), 0.5);
  // eigenvalues decay along the coordinate axes, so the half-widths grow
  for (int i = 1; i < 6; ++i) REQUIRE(report.delta_theta[i] > report.delta_theta[i - 1]);
}

TEST_CASE("regularizing the Hessian never widens an interval", "[uncertainty]") {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    Mat j(8, 5);
    for (int i = 0; i < 8; ++i)
      for (int k = 0; k < 5; ++k) j(i, k) = rng.normal();
    Mat h = j.transpose() * j + 1e-3 * Mat::Identity(5, 5);
    const UncertaintyReport base = parameter_uncertainty(h, 1.0);
    for (double reg : {1e-3, 0.1, 10.0}) {
      Mat h_reg = h;
      h_reg.diagonal().array() += reg;
      const UncertaintyReport tighter = parameter_uncertainty(h_reg, 1.0);
      for (int i = 0; i < 5; ++i)
        REQUIRE(tighter.delta_theta[i] <= base.delta_theta[i] + 1e-12);
    }
  }
}

TEST_CASE("a singular Hessian is reported with infinity markers", "[uncertainty]") {
  const UncertaintyReport report = parameter_uncertainty(Mat::Zero(3, 3), 1.0);
  CHECK(report.singular);
  for (int i = 0; i < 3; ++i) CHECK(std::isinf(report.delta_theta[i]));
}

TEST_CASE("classification splits on the cutoff against the box width", "[uncertainty]") {
  Mat h(2, 2);
  h << 1e4, 0.0, 0.0, 1e-4;
  const UncertaintyReport report = parameter_uncertainty(h, 1.0, 0.01, 0.5);
  // delta = sqrt(0.02 / 1e4) = 1.4e-3 (stiff) and sqrt(0.02/1e-4) = 14 (sloppy)
  CHECK(report.classification[0] == ParameterClass::Stiff);
  CHECK(report.classification[1] == ParameterClass::Sloppy);

  Vec widths(2);
  widths << 1e-4, 100.0;
  const UncertaintyReport scaled = parameter_uncertainty(h, 1.0, 0.01, 0.5, widths);
  CHECK(scaled.classification[0] == ParameterClass::Sloppy);  // tiny box width
  CHECK(scaled.classification[1] == ParameterClass::Stiff);
}

TEST_CASE("invalid inputs are rejected", "[uncertainty]") {
  CHECK_THROWS_AS(parameter_uncertainty(Mat::Ones(2, 3), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(parameter_uncertainty(Mat::Identity(2, 2), 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(parameter_uncertainty(Mat::Identity(2, 2), -1.0), std::invalid_argument);
}
