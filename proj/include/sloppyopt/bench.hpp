#pragma once
// Sample-efficiency benchmark harness: stratified train/test dataset splits,
// shared-start multi-optimizer runs under a common simulator-call budget,
// per-call trace CSVs, held-out checkpoint curves, and a summary JSON.
// Test-set evaluations bypass the budgeted evaluator entirely.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sloppyopt/baselines.hpp"
#include "sloppyopt/core.hpp"
#include "sloppyopt/evaluator.hpp"
#include "sloppyopt/hierarchical.hpp"
#include "sloppyopt/loss.hpp"
#include "sloppyopt/models.hpp"

namespace sloppyopt {

/// Stratified split over up to the first two condition axes (linear bins,
/// default 3x3). Strata with fewer than two members are merged into the
/// nearest occupied stratum; each stratum is then split at the given
/// fraction with rounding toward the training side.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double fraction,
                                                 std::uint64_t seed,
                                                 std::array<int, 2> bins = {3, 3}) {
  dataset.validate();
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split_dataset: fraction in (0,1)");
  const int count = dataset.conditions();
  const int axes = std::min<int>(2, static_cast<int>(dataset.inputs.front().size()));

  // assign each condition to a bin over the first `axes` input columns
  std::vector<std::array<int, 2>> coords(count, {0, 0});
  std::array<int, 2> used_bins = {1, 1};
  for (int a = 0; a < axes; ++a) {
    double lo = dataset.inputs[0][a], hi = lo;
    for (const auto& in : dataset.inputs) {
      lo = std::min(lo, in[a]);
      hi = std::max(hi, in[a]);
    }
    if (hi <= lo) continue;  // degenerate axis, single bin
    used_bins[a] = std::max(1, bins[a]);
    for (int i = 0; i < count; ++i) {
      const double t = (dataset.inputs[i][a] - lo) / (hi - lo);
      coords[i][a] = std::min(used_bins[a] - 1, static_cast<int>(t * used_bins[a]));
    }
  }
  auto stratum_of = [&](const std::array<int, 2>& c) { return c[0] * used_bins[1] + c[1]; };
  const int n_strata = used_bins[0] * used_bins[1];
  std::vector<std::vector<int>> members(n_strata);
  for (int i = 0; i < count; ++i) members[stratum_of(coords[i])].push_back(i);

  // merge undersized strata into the nearest occupied one
  auto center = [&](int s) {
    return std::pair<double, double>{s / used_bins[1] + 0.5, s % used_bins[1] + 0.5};
  };
  for (int s = 0; s < n_strata; ++s) {
    if (members[s].empty() || members[s].size() >= 2) continue;
    int target = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int t = 0; t < n_strata; ++t) {
      if (t == s || members[t].empty()) continue;
      const auto [sx, sy] = center(s);
      const auto [tx, ty] = center(t);
      const double d = (sx - tx) * (sx - tx) + (sy - ty) * (sy - ty);
      if (d < best) {
        best = d;
        target = t;
      }
    }
    if (target < 0) continue;  // only stratum in play
    for (int idx : members[s]) members[target].push_back(idx);
    members[s].clear();
  }

  // per-stratum shuffle and split, rounding toward train
  Rng rng(seed);
  std::vector<bool> is_test(count, false);
  for (int s = 0; s < n_strata; ++s) {
    auto& idx = members[s];
    if (idx.empty()) continue;
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.index(i)]);
    // floor with a round-off guard; fractional items go to the train side
    const int n_test =
        static_cast<int>((1.0 - fraction) * static_cast<double>(idx.size()) + 1e-9);
    for (int j = 0; j < n_test; ++j) is_test[idx[j]] = true;
  }

  Dataset train, test;
  train.input_names = test.input_names = dataset.input_names;
  train.observable_names = test.observable_names = dataset.observable_names;
  for (int i = 0; i < count; ++i) {
    Dataset& dst = is_test[i] ? test : train;
    dst.inputs.push_back(dataset.inputs[i]);
    dst.observed.push_back(dataset.observed[i]);
  }
  return {std::move(train), std::move(test)};
}

struct OptimizerSpec {
  std::string name;  // hier_exact | hier_stoch | powell | nelder_mead | de | lm
  int sketch_k = 5;  // hier_stoch only
  HierarchicalConfig hier;
  DEConfig de;
  LMConfig lm;
  InnerSolverOptions inner;

  std::string label() const {
    if (name == "hier_stoch") return name + "_k" + std::to_string(sketch_k);
    return name;
  }
};

struct BenchmarkPlan {
  std::shared_ptr<const ResidualProblem> train_problem;
  std::shared_ptr<const ResidualProblem> test_problem;  // optional
  Vec theta0;
  long budget = 1500;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int checkpoint_every = 25;
  double threshold_fraction = 0.1;
  std::vector<OptimizerSpec> optimizers;
  std::string output_dir;  // empty: keep everything in memory

  void validate() const {
    if (!train_problem) throw std::invalid_argument("BenchmarkPlan: no problem");
    if (optimizers.empty()) throw std::invalid_argument("BenchmarkPlan: no optimizers");
    if (seeds.empty()) throw std::invalid_argument("BenchmarkPlan: no seeds");
    if (budget < 1) throw std::invalid_argument("BenchmarkPlan: budget < 1");
    if (theta0.size() != train_problem->dimension())
      throw std::invalid_argument("BenchmarkPlan: theta0 dimension mismatch");
    if (checkpoint_every < 1) throw std::invalid_argument("BenchmarkPlan: checkpoint cadence");
  }
};

struct BenchmarkRun {
  std::string optimizer;
  std::uint64_t seed = 0;
  bool completed = false;
  std::string error;
  OptimizationTrace trace;
  std::vector<std::pair<long, double>> checkpoints;  // (call_index, test loss)
  Vec theta_best;
  double best_train_loss = std::numeric_limits<double>::infinity();
  double final_test_loss = std::numeric_limits<double>::quiet_NaN();
  long calls = 0;
  long calls_to_threshold = -1;
};

struct BenchmarkBundle {
  double theta0_loss = 0.0;
  double threshold = 0.0;
  std::vector<BenchmarkRun> runs;
};

/// First call index at which the running-best recorded loss reaches the
/// threshold; -1 when it never does.
inline long calls_to_threshold(const OptimizationTrace& trace, double threshold) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& rec : trace.records) {
    best = std::min(best, rec.loss);
    if (best <= threshold) return rec.call_index;
  }
  return -1;
}

inline void write_trace_csv(const OptimizationTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
  out << "call_index,phase,train_loss\n";
  for (const auto& rec : trace.records)
    out << rec.call_index << ',' << phase_name(rec.phase) << ','
        << detail::format_double(rec.loss) << '\n';
}

inline void write_checkpoints_csv(const std::vector<std::pair<long, double>>& checkpoints,
                                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint file for writing: " + path);
  out << "call_index,test_loss\n";
  for (const auto& [idx, loss] : checkpoints)
    out << idx << ',' << detail::format_double(loss) << '\n';
}

namespace detail {

inline double test_loss_at(const ResidualProblem& test_problem, const Vec& theta) {
  return guarded_objective(test_problem.evaluate(reflect_nonnegative(theta)));
}

inline void dispatch_optimizer(const OptimizerSpec& spec, Evaluator& ev,
                               OptimizationTrace& trace, const Vec& theta0, long budget,
                               std::uint64_t seed) {
  const int wide_budget =
      static_cast<int>(std::min<long>(budget * 4, std::numeric_limits<int>::max() / 2));
  if (spec.name == "hier_exact" || spec.name == "hier_stoch") {
    HierarchicalConfig cfg = spec.hier;
    cfg.strategy = spec.name == "hier_exact" ? Strategy::Exact : Strategy::Stochastic;
    cfg.sketch_k = spec.sketch_k;
    cfg.seed = seed;
    run_hierarchical(ev, trace, theta0, cfg);
  } else if (spec.name == "powell") {
    full_space_powell(ev, theta0, wide_budget, spec.inner);
  } else if (spec.name == "nelder_mead") {
    full_space_nelder_mead(ev, theta0, wide_budget, spec.inner);
  } else if (spec.name == "de") {
    DEConfig cfg = spec.de;
    cfg.seed = seed;
    differential_evolution(ev, BoundsBox::unit(ev.dimension()), cfg, theta0);
  } else if (spec.name == "lm") {
    levenberg_marquardt_fd(ev, theta0, BoundsBox::unit(ev.dimension()), spec.lm);
  } else {
    throw std::invalid_argument("unknown optimizer: " + spec.name);
  }
}

}  // namespace detail

inline BenchmarkRun run_single(const BenchmarkPlan& plan, const OptimizerSpec& spec,
                               std::uint64_t seed, double threshold) {
  BenchmarkRun run;
  run.optimizer = spec.label();
  run.seed = seed;
  run.theta_best = plan.theta0;

  Evaluator ev(*plan.train_problem, &run.trace);
  ev.set_budget(plan.budget);
  ev.set_callback([&](long call_index, const Vec& theta, double loss) {
    if (loss < run.best_train_loss) {
      run.best_train_loss = loss;
      run.theta_best = theta;
    }
    if (plan.test_problem && call_index % plan.checkpoint_every == 0)
      run.checkpoints.emplace_back(call_index,
                                   detail::test_loss_at(*plan.test_problem, run.theta_best));
  });

  try {
    detail::dispatch_optimizer(spec, ev, run.trace, plan.theta0, plan.budget, seed);
    run.completed = true;
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  run.calls = ev.calls();
  run.calls_to_threshold = calls_to_threshold(run.trace, threshold);
  if (plan.test_problem && run.best_train_loss < std::numeric_limits<double>::infinity())
    run.final_test_loss = detail::test_loss_at(*plan.test_problem, run.theta_best);
  return run;
}

inline BenchmarkBundle run_benchmark(const BenchmarkPlan& plan) {
  plan.validate();
  BenchmarkBundle bundle;
  {
    Evaluator probe(*plan.train_problem);
    bundle.theta0_loss = probe.loss(plan.theta0);
  }
  bundle.threshold = plan.threshold_fraction * bundle.theta0_loss;

  for (const auto& spec : plan.optimizers)
    for (const std::uint64_t seed : plan.seeds)
      bundle.runs.push_back(run_single(plan, spec, seed, bundle.threshold));

  if (!plan.output_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(plan.output_dir);
    nlohmann::json summary;
    summary["theta0_loss"] = bundle.theta0_loss;
    summary["threshold"] = bundle.threshold;
    summary["budget"] = plan.budget;
    summary["runs"] = nlohmann::json::array();
    for (const auto& run : bundle.runs) {
      const std::string stem = run.optimizer + "_seed" + std::to_string(run.seed);
      const std::string trace_file = stem + "_trace.csv";
      write_trace_csv(run.trace, (fs::path(plan.output_dir) / trace_file).string());
      std::string checkpoint_file;
      if (plan.test_problem) {
        checkpoint_file = stem + "_checkpoints.csv";
        write_checkpoints_csv(run.checkpoints,
                              (fs::path(plan.output_dir) / checkpoint_file).string());
      }
      nlohmann::json j;
      j["optimizer"] = run.optimizer;
      j["seed"] = run.seed;
      j["completed"] = run.completed;
      if (!run.error.empty()) j["error"] = run.error;
      j["calls"] = run.calls;
      j["final_train_loss"] = run.best_train_loss;
      if (plan.test_problem) j["final_test_loss"] = run.final_test_loss;
      j["calls_to_threshold"] = run.calls_to_threshold;
      j["trace_file"] = trace_file;
      if (!checkpoint_file.empty()) j["checkpoint_file"] = checkpoint_file;
      summary["runs"].push_back(std::move(j));
    }
    std::ofstream out(fs::path(plan.output_dir) / "summary.json");
    if (!out) throw std::runtime_error("cannot write benchmark summary");
    out << summary.dump(2) << '\n';
  }
  return bundle;
}

}  // namespace sloppyopt
