#pragma once
// Built-in residual problems: a quadratic with a prescribed eigenvalue
// spectrum (exact algebra available for every oracle), a sum-of-exponentials
// calibration problem (the canonical exponentially-sloppy benchmark), and a
// small two-coverage surface-kinetics simulator with adsorption, desorption,
// Eley-Rideal and Langmuir-Hinshelwood recombination channels.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sloppyopt/core.hpp"
#include "sloppyopt/hessian.hpp"
#include "sloppyopt/loss.hpp"
#include "sloppyopt/subspace.hpp"

namespace sloppyopt {

/// Forward simulator over a list of experimental conditions. Parameters are
/// normalized to [0,1]^n; the model owns the physical bounds box.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;

  virtual int parameter_count() const = 0;
  virtual int observables_per_condition() const = 0;
  virtual const std::vector<Vec>& conditions() const = 0;
  virtual const BoundsBox& bounds() const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
  virtual std::vector<std::string> condition_names() const = 0;
  virtual std::vector<std::string> observable_names() const = 0;
  /// Normalized "literature default" parameter vector.
  virtual Vec default_theta() const = 0;
  virtual Vec predict(const Vec& theta_norm, const Vec& condition) const = 0;
};

/// Stacks relative residuals of a forward model against a dataset into one
/// residual vector, in fixed condition-major order.
class DatasetResidualProblem : public ResidualProblem {
 public:
  DatasetResidualProblem(std::shared_ptr<const ForwardModel> model, Dataset dataset)
      : model_(std::move(model)), dataset_(std::move(dataset)) {
    dataset_.validate();
    if (dataset_.observables_per_condition() != model_->observables_per_condition())
      throw std::invalid_argument("DatasetResidualProblem: observable count mismatch");
  }

  int dimension() const override { return model_->parameter_count(); }
  int residual_size() const override { return dataset_.residual_length(); }
  const Dataset& dataset() const { return dataset_; }
  const ForwardModel& model() const { return *model_; }

 private:
  Vec residuals(const Vec& theta) const override {
    const int m = dataset_.observables_per_condition();
    Vec r(residual_size());
    for (int i = 0; i < dataset_.conditions(); ++i) {
      const Vec pred = model_->predict(theta, dataset_.inputs[i]);
      r.segment(static_cast<Eigen::Index>(i) * m, m) =
          (dataset_.observed[i] - pred).array() / dataset_.observed[i].array();
    }
    return r;
  }

  std::shared_ptr<const ForwardModel> model_;
  Dataset dataset_;
};

/// Samples observables at theta_star and perturbs them with relative
/// Gaussian noise. A draw that lands non-positive is resampled once, then
/// clamped to 10% of the prediction.
inline Dataset generate_synthetic_dataset(const ForwardModel& model, const Vec& theta_star,
                                          double noise_rel, std::uint64_t seed) {
  if (noise_rel < 0.0) throw std::invalid_argument("generate_synthetic_dataset: noise_rel < 0");
  Rng rng(seed);
  Dataset ds;
  ds.input_names = model.condition_names();
  ds.observable_names = model.observable_names();
  for (const Vec& cond : model.conditions()) {
    const Vec pred = model.predict(theta_star, cond);
    Vec obs(pred.size());
    for (int j = 0; j < pred.size(); ++j) {
      double val = pred[j] * (1.0 + noise_rel * rng.normal());
      if (val <= 0.0) val = pred[j] * (1.0 + noise_rel * rng.normal());
      if (val <= 0.0) val = 0.1 * pred[j];
      obs[j] = val;
    }
    ds.inputs.push_back(cond);
    ds.observed.push_back(std::move(obs));
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Prescribed-spectrum quadratic
// ---------------------------------------------------------------------------

/// r(theta) = A (theta - theta_star) with singular values of A chosen so the
/// Gauss-Newton Hessian has eigenvalues 10^{-d*(i-1)}, i = 1..n.
class PrescribedSpectrumQuadratic : public ResidualProblem {
 public:
  PrescribedSpectrumQuadratic(int n, int m, double decade_rate, std::uint64_t seed,
                              bool axis_aligned = false)
      : PrescribedSpectrumQuadratic(build_matrix(n, m, decade_rate, seed, axis_aligned),
                                    Vec::Constant(n, 0.5)) {}

  PrescribedSpectrumQuadratic(Mat a, Vec theta_star)
      : a_(std::move(a)), theta_star_(std::move(theta_star)) {
    if (a_.cols() != theta_star_.size())
      throw std::invalid_argument("PrescribedSpectrumQuadratic: dimension mismatch");
  }

  int dimension() const override { return static_cast<int>(a_.cols()); }
  int residual_size() const override { return static_cast<int>(a_.rows()); }
  const Mat& design_matrix() const { return a_; }
  const Vec& theta_star() const { return theta_star_; }

  /// Exact Gauss-Newton Hessian A^T A (oracle for finite-difference tests).
  Mat exact_hessian() const { return a_.transpose() * a_; }

 private:
  static Mat build_matrix(int n, int m, double decade_rate, std::uint64_t seed,
                          bool axis_aligned) {
    if (m < n) throw std::invalid_argument("PrescribedSpectrumQuadratic: need m >= n");
    Rng rng(seed);
    Vec sigma(n);
    for (int i = 0; i < n; ++i) sigma[i] = std::pow(10.0, -decade_rate * i / 2.0);
    Mat u(m, n), v(n, n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) u(i, j) = rng.normal();
      for (int i = 0; i < n; ++i) v(i, j) = rng.normal();
    }
    Eigen::HouseholderQR<Mat> qu(u);
    u = qu.householderQ() * Mat::Identity(m, n);
    if (axis_aligned) {
      v = Mat::Identity(n, n);
    } else {
      Eigen::HouseholderQR<Mat> qv(v);
      v = qv.householderQ() * Mat::Identity(n, n);
    }
    return u * sigma.asDiagonal() * v.transpose();
  }

  Vec residuals(const Vec& theta) const override { return a_ * (theta - theta_star_); }

  Mat a_;
  Vec theta_star_;
};

// ---------------------------------------------------------------------------
// Sum of exponentials
// ---------------------------------------------------------------------------

/// Signal y(t) = sum_i exp(-rate_i * t) sampled at fixed times; fitting the
/// decay rates from such data is the textbook exponentially-sloppy problem.
class SumOfExponentialsModel : public ForwardModel {
 public:
  explicit SumOfExponentialsModel(int n, int samples = 0, double t_min = 0.1,
                                  double t_max = 20.0)
      : n_(n), bounds_(Vec::Constant(n, 0.05), Vec::Constant(n, 3.0)) {
    if (n < 1) throw std::invalid_argument("SumOfExponentialsModel: n < 1");
    if (samples <= 0) samples = 3 * n;
    if (!(t_min > 0.0 && t_max > t_min))
      throw std::invalid_argument("SumOfExponentialsModel: bad time window");
    conditions_.reserve(samples);
    for (int j = 0; j < samples; ++j) {
      Vec t(1);
      // log-spaced samples resolve both the fast and the slow decays
      t[0] = samples == 1 ? t_min
                          : t_min * std::pow(t_max / t_min, static_cast<double>(j) / (samples - 1));
      conditions_.push_back(std::move(t));
    }
  }

  int parameter_count() const override { return n_; }
  int observables_per_condition() const override { return 1; }
  const std::vector<Vec>& conditions() const override { return conditions_; }
  const BoundsBox& bounds() const override { return bounds_; }

  std::vector<std::string> parameter_names() const override {
    std::vector<std::string> names;
    for (int i = 0; i < n_; ++i) names.push_back("rate_" + std::to_string(i));
    return names;
  }
  std::vector<std::string> condition_names() const override { return {"time"}; }
  std::vector<std::string> observable_names() const override { return {"signal"}; }

  /// Geometrically spread decay rates in [0.1, 3.0] (normalized).
  Vec default_theta() const override {
    Vec rates(n_);
    for (int i = 0; i < n_; ++i)
      rates[i] = n_ == 1 ? 0.5 : 0.1 * std::pow(30.0, static_cast<double>(i) / (n_ - 1));
    return bounds_.to_normalized(rates);
  }

  Vec predict(const Vec& theta_norm, const Vec& condition) const override {
    const Vec rates = bounds_.to_physical(theta_norm);
    double y = 0.0;
    for (int i = 0; i < n_; ++i) y += std::exp(-rates[i] * condition[0]);
    Vec out(1);
    out[0] = y;
    return out;
  }

 private:
  int n_;
  BoundsBox bounds_;
  std::vector<Vec> conditions_;
};

/// Self-contained residual problem: sum-of-exponentials data generated at the
/// model's default parameters (optionally noisy), fit in normalized space.
inline std::shared_ptr<DatasetResidualProblem> make_sum_of_exponentials_problem(
    int n, int samples = 0, double noise_rel = 0.0, std::uint64_t seed = 0) {
  auto model = std::make_shared<SumOfExponentialsModel>(n, samples);
  Dataset ds = generate_synthetic_dataset(*model, model->default_theta(), noise_rel, seed);
  return std::make_shared<DatasetResidualProblem>(model, std::move(ds));
}

// ---------------------------------------------------------------------------
// Toy surface kinetics
// ---------------------------------------------------------------------------

/// Fixed physical constants of the toy reactor. Magnitudes are chosen for
/// numerical conditioning of the toy, not taken from any literature source.
struct ToyKineticsConstants {
  double site_density_F = 1.5e19;      // physisorption sites per m^2
  double site_density_S = 3.0e17;      // chemisorption (defect) sites per m^2
  double atom_fraction = 0.1;          // O fraction of the gas density
  double atom_mass = 16.0 * 1.66053906660e-27;  // kg
  double desorption_prefactor = 1e15;  // s^-1, nu_d = pref * (A + B exp(E/kT))
  double lh_prefactor = 1e7;           // s^-1, effective L-H attempt frequency
  // fixed Arrhenius desorption of chemisorbed atoms; gives the E-R channel
  // its temperature dependence
  double chem_desorption_prefactor = 1e13;  // s^-1
  double chem_desorption_energy = 0.5;      // eV
};

struct KineticsRates {
  double flux = 0.0;    // impinging O atoms per m^2 s
  double a_F = 0.0;     // per-site adsorption rate onto F sites
  double nu_d = 0.0;    // physisorption desorption frequency
  double nu_LH = 0.0;   // per-site L-H recombination frequency
  double a_S = 0.0;     // per-site chemisorption rate onto S sites
  double k_ER = 0.0;    // per-site E-R consumption frequency of adsorbed O
  double nu_dS = 0.0;   // chemisorption desorption frequency (fixed Arrhenius)
};

struct SteadyState {
  double theta_F = 0.0;  // physisorbed coverage
  double theta_S = 0.0;  // chemisorbed coverage
  double gamma = 0.0;    // recombination probability
};

/// Physical parameters of the toy scheme (order matches parameter_names()).
struct KineticsParams {
  double s_F;    // adsorption steric factor (physisorption)
  double s_S;    // chemisorption steric factor
  double s_ER;   // Eley-Rideal steric factor
  double s_LH;   // Langmuir-Hinshelwood steric factor
  double E_LH;   // L-H activation energy, eV
  double A_des;  // desorption coefficient A
  double B_des;  // desorption coefficient B
  double E_des;  // desorption energy, eV
};

/// Two-coverage surface kinetics over a (pressure, temperature) grid with
/// the recombination probability as the single observable. Eight free
/// parameters; heavily correlated by construction, so the Gauss-Newton
/// spectrum at the optimum spans many decades.
class ToySurfaceKinetics : public ForwardModel {
 public:
  ToySurfaceKinetics(std::vector<double> pressures_torr, std::vector<double> temperatures_K,
                     ToyKineticsConstants constants = {})
      : constants_(constants), bounds_(default_bounds()) {
    if (pressures_torr.empty() || temperatures_K.empty())
      throw std::invalid_argument("ToySurfaceKinetics: empty condition grid");
    for (double p : pressures_torr)
      for (double t : temperatures_K) {
        if (p <= 0.0 || t <= 0.0)
          throw std::invalid_argument("ToySurfaceKinetics: conditions must be positive");
        Vec c(2);
        c << p, t;
        conditions_.push_back(std::move(c));
      }
  }

  /// Log-spaced pressures in [0.3, 3] Torr, linear temperatures in
  /// [250, 350] K.
  static ToySurfaceKinetics grid(int np, int nt, ToyKineticsConstants constants = {}) {
    std::vector<double> ps(np), ts(nt);
    for (int i = 0; i < np; ++i)
      ps[i] = np == 1 ? 1.0 : std::pow(10.0, std::log10(0.3) + (std::log10(3.0) - std::log10(0.3)) * i / (np - 1));
    for (int i = 0; i < nt; ++i) ts[i] = nt == 1 ? 300.0 : 250.0 + 100.0 * i / (nt - 1);
    return ToySurfaceKinetics(std::move(ps), std::move(ts), constants);
  }

  int parameter_count() const override { return 8; }
  int observables_per_condition() const override { return 1; }
  const std::vector<Vec>& conditions() const override { return conditions_; }
  const BoundsBox& bounds() const override { return bounds_; }
  const ToyKineticsConstants& constants() const { return constants_; }

  std::vector<std::string> parameter_names() const override {
    return {"s_F", "s_S", "s_ER", "s_LH", "E_LH", "A_des", "B_des", "E_des"};
  }
  std::vector<std::string> condition_names() const override {
    return {"pressure_torr", "temperature_K"};
  }
  std::vector<std::string> observable_names() const override { return {"gamma_O"}; }

  Vec default_theta() const override {
    Vec phys(8);
    phys << 0.15, 0.03, 0.05, 0.3, 0.15, 3e-12, 3e-13, 0.08;
    return bounds_.to_normalized(phys);
  }

  KineticsParams physical_params(const Vec& theta_norm) const {
    const Vec p = bounds_.to_physical(theta_norm);
    return KineticsParams{p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]};
  }

  KineticsRates rates(const KineticsParams& p, const Vec& condition) const {
    constexpr double kBoltzmannSI = 1.380649e-23;   // J/K
    constexpr double kBoltzmannEv = 8.617333262e-5;  // eV/K
    constexpr double kTorrToPa = 133.322;
    const double pressure = condition[0] * kTorrToPa;
    const double temperature = condition[1];
    KineticsRates r;
    const double gas_density = pressure / (kBoltzmannSI * temperature);
    const double mean_speed =
        std::sqrt(8.0 * kBoltzmannSI * temperature / (M_PI * constants_.atom_mass));
    r.flux = constants_.atom_fraction * gas_density * mean_speed / 4.0;
    r.a_F = p.s_F * r.flux / constants_.site_density_F;
    r.a_S = p.s_S * r.flux / constants_.site_density_S;
    r.k_ER = p.s_ER * r.flux / constants_.site_density_S;
    const double kT = kBoltzmannEv * temperature;
    r.nu_d = constants_.desorption_prefactor * (p.A_des + p.B_des * std::exp(p.E_des / kT));
    r.nu_LH = p.s_LH * constants_.lh_prefactor * std::exp(-p.E_LH / kT);
    r.nu_dS = constants_.chem_desorption_prefactor *
              std::exp(-constants_.chem_desorption_energy / kT);
    return r;
  }

  /// Closed-form stationary coverages and recombination probability.
  /// theta_F solves 2 nu_LH x^2 + (a_F + nu_d) x - a_F = 0 (stable root);
  /// theta_S balances chemisorption against E-R consumption.
  SteadyState steady_state_physical(const KineticsParams& p, const Vec& condition) const {
    const KineticsRates r = rates(p, condition);
    SteadyState ss;
    const double s = r.a_F + r.nu_d;
    if (r.a_F <= 0.0) {
      ss.theta_F = 0.0;
    } else if (r.nu_LH > 0.0) {
      ss.theta_F = 2.0 * r.a_F / (s + std::sqrt(s * s + 8.0 * r.nu_LH * r.a_F));
    } else {
      ss.theta_F = r.a_F / s;
    }
    const double s_loss = r.a_S + r.k_ER + r.nu_dS;
    ss.theta_S = s_loss > 0.0 ? r.a_S / s_loss : 0.0;
    ss.gamma = recombination_probability(p, r, ss.theta_F, ss.theta_S);
    return ss;
  }

  /// Reference path: integrate the coverage ODE from empty surface with an
  /// adaptive backward-Euler scheme until the state is stationary.
  SteadyState steady_state_ode(const KineticsParams& p, const Vec& condition) const {
    const KineticsRates r = rates(p, condition);
    const double rate_scale =
        std::max({r.a_F + r.nu_d + 2.0 * r.nu_LH, r.a_S + r.k_ER + r.nu_dS, 1.0});
    auto rhs = [&](double tf, double ts, double& f1, double& f2) {
      f1 = r.a_F * (1.0 - tf) - r.nu_d * tf - 2.0 * r.nu_LH * tf * tf;
      f2 = r.a_S * (1.0 - ts) - (r.k_ER + r.nu_dS) * ts;
    };
    double tf = 0.0, ts = 0.0;
    double dt = 0.1 / rate_scale;
    const double dt_max = 1e9 / rate_scale;
    const double f_tol = 1e-12 * rate_scale;
    for (int step = 0; step < 2000; ++step) {
      double f1 = 0.0, f2 = 0.0;
      rhs(tf, ts, f1, f2);
      if (std::max(std::abs(f1), std::abs(f2)) < f_tol) break;
      // backward Euler, Newton on the implicit state
      double xf = tf, xs = ts;
      bool ok = false;
      for (int k = 0; k < 50; ++k) {
        double g1 = 0.0, g2 = 0.0;
        rhs(xf, xs, g1, g2);
        const double res1 = xf - tf - dt * g1;
        const double res2 = xs - ts - dt * g2;
        const double j11 = 1.0 + dt * (r.a_F + r.nu_d + 4.0 * r.nu_LH * xf);
        const double j22 = 1.0 + dt * (r.a_S + r.k_ER + r.nu_dS);
        const double step_f = res1 / j11;
        const double step_s = res2 / j22;
        xf -= step_f;
        xs -= step_s;
        if (std::abs(step_f) + std::abs(step_s) <
            1e-14 * (1.0 + std::abs(xf) + std::abs(xs))) {
          ok = true;
          break;
        }
      }
      if (!ok || !std::isfinite(xf) || !std::isfinite(xs)) {
        return SteadyState{std::nan(""), std::nan(""), std::nan("")};
      }
      tf = xf;
      ts = xs;
      dt = std::min(dt * 1.5, dt_max);
    }
    SteadyState ss;
    ss.theta_F = tf;
    ss.theta_S = ts;
    ss.gamma = recombination_probability(p, r, tf, ts);
    return ss;
  }

  Vec predict(const Vec& theta_norm, const Vec& condition) const override {
    const SteadyState ss = steady_state_physical(physical_params(theta_norm), condition);
    Vec out(1);
    out[0] = ss.gamma;
    return out;
  }

 private:
  double recombination_probability(const KineticsParams& p, const KineticsRates& r,
                                   double theta_F, double theta_S) const {
    if (r.flux <= 0.0) return 0.0;
    // each recombination event removes two O atoms; E-R events occur at
    // s_ER * flux * theta_S per unit area, L-H at nu_LH * theta_F^2 * n_F
    const double lh_flux = 2.0 * r.nu_LH * theta_F * theta_F * constants_.site_density_F;
    const double er_flux = 2.0 * p.s_ER * r.flux * theta_S;
    return (lh_flux + er_flux) / r.flux;
  }

  static BoundsBox default_bounds() {
    Vec lo(8), hi(8);
    lo << 0.01, 0.001, 0.001, 0.01, 0.05, 1e-13, 1e-14, 0.02;
    hi << 0.40, 0.200, 0.200, 0.90, 0.25, 1e-10, 1e-12, 0.12;
    return BoundsBox(lo, hi);
  }

  ToyKineticsConstants constants_;
  BoundsBox bounds_;
  std::vector<Vec> conditions_;
};

/// Free-function form used by callers that hold the model by interface.
inline SteadyState steady_state(const ToySurfaceKinetics& kinetics, const Vec& condition,
                                const Vec& theta_norm) {
  return kinetics.steady_state_physical(kinetics.physical_params(theta_norm), condition);
}

/// Decades spanned by the regularization-free Gauss-Newton spectrum at theta:
/// log10(lambda_1 / lambda_n).
inline double sloppy_spectrum_decades(const ResidualProblem& problem, const Vec& theta,
                                      double h = 1e-6) {
  const Mat j = fd_jacobian(problem, theta, h);
  const EigenSpectrum s = eigendecompose(gauss_newton_hessian(j, 0.0));
  const double top = s.eigenvalues[0];
  const double bottom = std::max(s.eigenvalues[s.size() - 1], 1e-300);
  if (top <= 0.0) return 0.0;
  return std::log10(top / bottom);
}

}  // namespace sloppyopt
