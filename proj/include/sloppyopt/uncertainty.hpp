#pragma once
// Hessian-derived parameter uncertainty: confidence half-widths
// dtheta_i = sqrt(2 * dPhi * (H^-1)_ii) for a loss increase dPhi, plus a
// stiff/sloppy classification against the parameter box width.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sloppyopt/core.hpp"

namespace sloppyopt {

enum class ParameterClass { Stiff, Sloppy };

struct UncertaintyReport {
  Vec delta_theta;  // normalized units
  double delta_phi_threshold = 0.0;
  std::vector<ParameterClass> classification;
  bool singular = false;  // H not invertible; entries are +inf
};

/// dPhi = fraction * phi_final; dtheta_i = sqrt(2 dPhi (H^-1)_ii).
/// A parameter counts as stiff when its half-width is below
/// stiff_cutoff * (box width); widths default to the unit box.
inline UncertaintyReport parameter_uncertainty(const Mat& hessian, double phi_final,
                                               double fraction = 0.01,
                                               double stiff_cutoff = 0.5,
                                               const Vec& box_width = Vec()) {
  if (hessian.rows() != hessian.cols())
    throw std::invalid_argument("parameter_uncertainty: Hessian not square");
  if (fraction <= 0.0) throw std::invalid_argument("parameter_uncertainty: fraction <= 0");
  if (phi_final < 0.0) throw std::invalid_argument("parameter_uncertainty: negative loss");
  const int n = static_cast<int>(hessian.rows());
  const Vec widths = box_width.size() == 0 ? Vec::Ones(n) : box_width;
  if (widths.size() != n)
    throw std::invalid_argument("parameter_uncertainty: box width length mismatch");

  UncertaintyReport report;
  report.delta_phi_threshold = fraction * phi_final;
  report.delta_theta.resize(n);
  report.classification.resize(n);

  Eigen::LDLT<Mat> ldlt(hessian);
  Mat h_inv;
  bool ok = ldlt.info() == Eigen::Success;
  if (ok) {
    h_inv = ldlt.solve(Mat::Identity(n, n));
    ok = h_inv.allFinite();
    if (ok)
      for (int i = 0; i < n; ++i)
        if (h_inv(i, i) <= 0.0) ok = false;
  }
  if (!ok) {
    report.singular = true;
    report.delta_theta.setConstant(std::numeric_limits<double>::infinity());
    for (int i = 0; i < n; ++i) report.classification[i] = ParameterClass::Sloppy;
    return report;
  }
  for (int i = 0; i < n; ++i) {
    report.delta_theta[i] = std::sqrt(2.0 * report.delta_phi_threshold * h_inv(i, i));
    report.classification[i] = report.delta_theta[i] < stiff_cutoff * widths[i]
                                   ? ParameterClass::Stiff
                                   : ParameterClass::Sloppy;
  }
  return report;
}

inline const char* parameter_class_name(ParameterClass c) {
  return c == ParameterClass::Stiff ? "stiff" : "sloppy";
}

}  // namespace sloppyopt
