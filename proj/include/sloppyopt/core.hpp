#pragma once
// Shared domain types: parameter scaling, the residual-problem interface with
// call accounting, per-call trace records, and deterministic RNG helpers.

#include <Eigen/Core>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace sloppyopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Loss assigned to evaluations whose residuals contain NaN or Inf.
/// Direct-search solvers treat such points as very bad instead of aborting.
inline constexpr double kSentinelLoss = 1e12;

enum class Phase { Init, Stiff, Realign, Sloppy, Geometry, Baseline };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Init: return "init";
    case Phase::Stiff: return "stiff";
    case Phase::Realign: return "realign";
    case Phase::Sloppy: return "sloppy";
    case Phase::Geometry: return "geometry";
    case Phase::Baseline: return "baseline";
  }
  return "unknown";
}

/// One simulator call: the coordinates actually evaluated, the loss computed
/// from the returned residuals, and which phase of the run spent the call.
struct EvaluationRecord {
  long call_index = 0;  // 1-based, strictly increasing within a trace
  Vec theta;
  double loss = 0.0;
  Phase phase = Phase::Init;
};

/// Geometry diagnostics recorded once per outer iteration of the
/// hierarchical driver.
struct IterationDiagnostics {
  int iteration = 0;
  double loss = 0.0;
  double misalignment = 0.0;  // stiff-basis rotation vs. previous iteration
  int stiff_dim = 0;
  int sloppy_dim = 0;  // retained sloppy directions
  Vec eigenvalues;     // descending spectrum of the matrix driving the split
  long cumulative_calls = 0;
};

struct OptimizationTrace {
  std::vector<EvaluationRecord> records;
  std::vector<IterationDiagnostics> iterations;
};

/// Axis-aligned box of admissible physical parameters. Optimizers work in
/// normalized coordinates on [0,1]^n; the box maps them to physical scale.
struct BoundsBox {
  Vec lower;
  Vec upper;

  BoundsBox() = default;
  BoundsBox(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) { validate(); }

  static BoundsBox unit(int n) {
    return BoundsBox(Vec::Zero(n), Vec::Ones(n));
  }

  int dim() const { return static_cast<int>(lower.size()); }

  void validate() const {
    if (lower.size() != upper.size())
      throw std::invalid_argument("BoundsBox: lower/upper dimension mismatch");
    for (int i = 0; i < lower.size(); ++i)
      if (!(lower[i] < upper[i]))
        throw std::invalid_argument("BoundsBox: lower[" + std::to_string(i) +
                                    "] must be < upper[" + std::to_string(i) + "]");
  }

  Vec width() const { return upper - lower; }

  /// x[i] = lower[i] + theta[i] * (upper[i] - lower[i])
  Vec to_physical(const Vec& theta) const {
    if (theta.size() != lower.size())
      throw std::invalid_argument("to_physical: dimension mismatch");
    return lower.array() + theta.array() * (upper - lower).array();
  }

  Vec to_normalized(const Vec& x) const {
    if (x.size() != lower.size())
      throw std::invalid_argument("to_normalized: dimension mismatch");
    return (x - lower).array() / (upper - lower).array();
  }
};

/// Absolute value applied component-wise. Inner solvers are unconstrained;
/// evaluation wrappers reflect negative coordinates back into the
/// non-negative orthant before the simulator sees them.
inline Vec reflect_nonnegative(const Vec& theta) {
  return theta.cwiseAbs();
}

/// Abstract simulator: normalized parameter vector -> residual vector.
/// Implementations must be deterministic and safe for concurrent evaluation
/// at distinct points; the call counter is incremented atomically.
class ResidualProblem {
 public:
  virtual ~ResidualProblem() = default;

  virtual int dimension() const = 0;      // n, parameter count
  virtual int residual_size() const = 0;  // M, stacked residual length

  /// Runs the simulator once and counts the call.
  Vec evaluate(const Vec& theta) const {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return residuals(theta);
  }

  long call_count() const { return calls_.load(std::memory_order_relaxed); }
  void reset_call_count() const { calls_.store(0, std::memory_order_relaxed); }

 private:
  virtual Vec residuals(const Vec& theta) const = 0;

  mutable std::atomic<long> calls_{0};
};

/// Thrown by the evaluation layer when a run has spent its simulator budget.
class budget_exhausted_error : public std::runtime_error {
 public:
  explicit budget_exhausted_error(long budget)
      : std::runtime_error("simulator call budget exhausted (" +
                           std::to_string(budget) + " calls)") {}
};

/// Deterministic RNG with bit-stable sampling (not tied to the standard
/// library's unspecified distribution algorithms).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9E3779B97F4A7C15ull) {
    // warm up splitmix so nearby seeds decorrelate
    for (int i = 0; i < 4; ++i) next();
  }

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller (cached second value).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    have_spare_ = true;
    return mag * std::cos(two_pi * u2);
  }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Mixes a run seed with a stream id (e.g. outer-iteration index) into an
/// independent child seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng r(seed * 0x2545F4914F6CDD1Dull + stream);
  return r.next();
}

/// Thread cap for internal parallelism, from SLOPPYOPT_THREADS (default 1).
inline int thread_cap() {
  static const int cap = [] {
    const char* env = std::getenv("SLOPPYOPT_THREADS");
    if (env == nullptr) return 1;
    const long v = std::strtol(env, nullptr, 10);
    return v >= 1 ? static_cast<int>(v) : 1;
  }();
  return cap;
}

}  // namespace sloppyopt
