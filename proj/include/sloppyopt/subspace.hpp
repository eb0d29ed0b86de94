#pragma once
// Spectral machinery for the stiff/sloppy split: symmetric eigendecomposition
// with a reproducible sign convention, cumulative-variance partitioning,
// relative-threshold pruning of the sloppy block, basis lifting from sketch
// coordinates, and the subspace-rotation (misalignment) statistic.

#include <Eigen/Dense>

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "sloppyopt/core.hpp"

namespace sloppyopt {

/// Eigenvalues sorted descending with column-orthonormal eigenvectors.
/// Columns are sign-fixed: the entry of largest magnitude is positive, so
/// decompositions are reproducible across linear-algebra backends.
struct EigenSpectrum {
  Vec eigenvalues;
  Mat eigenvectors;

  int size() const { return static_cast<int>(eigenvalues.size()); }
};

inline EigenSpectrum eigendecompose(const Mat& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("eigendecompose: matrix not square");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("eigendecompose: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> solver(h);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigendecompose: eigensolver failed");
  const int d = static_cast<int>(h.rows());
  EigenSpectrum s;
  s.eigenvalues = solver.eigenvalues().reverse();
  s.eigenvectors = solver.eigenvectors().rowwise().reverse();
  for (int j = 0; j < d; ++j) {
    int arg = 0;
    s.eigenvectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (s.eigenvectors(arg, j) < 0.0) s.eigenvectors.col(j) *= -1.0;
  }
  return s;
}

/// Smallest k such that the top-k eigenvalues carry a fraction gamma of the
/// total spectral mass. Negative round-off eigenvalues count as zero.
inline int split_stiff(const Vec& eigenvalues_desc, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("split_stiff: gamma in (0,1]");
  const int d = static_cast<int>(eigenvalues_desc.size());
  double total = 0.0;
  for (int i = 0; i < d; ++i) total += std::max(0.0, eigenvalues_desc[i]);
  if (total <= 0.0) throw std::invalid_argument("split_stiff: spectrum has no positive mass");
  double cum = 0.0;
  for (int k = 0; k < d; ++k) {
    cum += std::max(0.0, eigenvalues_desc[k]);
    if (cum >= gamma * total) return k + 1;
  }
  return d;
}

inline int split_stiff(const EigenSpectrum& spectrum, double gamma) {
  return split_stiff(spectrum.eigenvalues, gamma);
}

/// Indices (0-based, into the descending spectrum) of the sloppy directions
/// kept for optimization: the leading sloppy direction always, the rest only
/// if their eigenvalue clears tau relative to it. Empty when k_s == d.
inline std::vector<int> prune_sloppy(const Vec& eigenvalues_desc, int k_s, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("prune_sloppy: tau must be > 0");
  const int d = static_cast<int>(eigenvalues_desc.size());
  if (k_s < 0 || k_s > d) throw std::invalid_argument("prune_sloppy: k_s out of range");
  std::vector<int> keep;
  if (k_s == d) return keep;  // no sloppy directions at all
  keep.push_back(k_s);
  const double threshold = tau * eigenvalues_desc[k_s];
  for (int i = k_s + 1; i < d; ++i)
    if (eigenvalues_desc[i] >= threshold) keep.push_back(i);
  return keep;
}

/// V = Omega * U; column-orthonormal whenever both factors are.
inline Mat lift(const Mat& omega, const Mat& u) {
  if (omega.cols() != u.rows()) throw std::invalid_argument("lift: dimension mismatch");
  return omega * u;
}

/// delta_s = max_j (1 - sigma_j) over singular values of V_new^T V_prev.
/// Zero iff the two bases span the same subspace; 1 for orthogonal ones.
/// When dimensions differ the top min(k, k') singular values are used.
inline double misalignment(const Mat& v_prev, const Mat& v_new) {
  if (v_prev.cols() == 0 || v_new.cols() == 0)
    throw std::invalid_argument("misalignment: empty basis");
  if (v_prev.rows() != v_new.rows())
    throw std::invalid_argument("misalignment: ambient dimension mismatch");
  const Mat overlap = v_new.transpose() * v_prev;
  Eigen::JacobiSVD<Mat> svd(overlap);
  const Vec sigma = svd.singularValues();  // descending, min(k,k') values
  const double sigma_min = sigma[sigma.size() - 1];
  return std::clamp(1.0 - sigma_min, 0.0, 1.0);
}

/// Stiff basis, retained sloppy basis, and the spectrum they came from.
/// Bases live in the coordinate space of the decomposed matrix; for the
/// sketched strategy the caller lifts them to ambient coordinates.
struct SubspacePartition {
  Mat stiff_basis;   // d x k_s
  Mat sloppy_basis;  // d x (retained), possibly zero columns
  Vec eigenvalues;   // descending spectrum driving the split
  int k_s = 0;
  bool sloppy_empty = false;

  int stiff_dim() const { return static_cast<int>(stiff_basis.cols()); }
  int sloppy_dim() const { return static_cast<int>(sloppy_basis.cols()); }
};

inline SubspacePartition partition_spectrum(const EigenSpectrum& spectrum, double gamma,
                                            double tau) {
  SubspacePartition part;
  part.eigenvalues = spectrum.eigenvalues;
  part.k_s = split_stiff(spectrum, gamma);
  part.stiff_basis = spectrum.eigenvectors.leftCols(part.k_s);
  const auto keep = prune_sloppy(spectrum.eigenvalues, part.k_s, tau);
  part.sloppy_basis.resize(spectrum.eigenvectors.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    part.sloppy_basis.col(static_cast<Eigen::Index>(j)) = spectrum.eigenvectors.col(keep[j]);
  part.sloppy_empty = keep.empty();
  return part;
}

}  // namespace sloppyopt
