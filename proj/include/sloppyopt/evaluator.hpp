#pragma once
// Evaluation layer between optimizers and a ResidualProblem. Responsibilities:
//  - reflect negative coordinates before the simulator sees them,
//  - memoize residuals on exact coordinates so that re-deriving a loss at an
//    already-simulated point is free (only genuine simulator calls count),
//  - enforce an optional call budget,
//  - append one trace record per simulator call, in deterministic order even
//    when probe batches are evaluated on several threads.

#include <atomic>
#include <cstring>
#include <functional>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sloppyopt/core.hpp"
#include "sloppyopt/loss.hpp"

namespace sloppyopt {

class Evaluator {
 public:
  using Callback = std::function<void(long call_index, const Vec& theta, double loss)>;

  explicit Evaluator(const ResidualProblem& problem, OptimizationTrace* trace = nullptr,
                     bool reflect = true)
      : problem_(problem), trace_(trace), reflect_(reflect) {}

  int dimension() const { return problem_.dimension(); }
  int residual_size() const { return problem_.residual_size(); }
  const ResidualProblem& problem() const { return problem_; }

  void set_phase(Phase phase) { phase_ = phase; }
  Phase phase() const { return phase_; }

  /// budget < 0 means unlimited.
  void set_budget(long max_calls) { budget_ = max_calls; }
  long budget() const { return budget_; }

  /// Invoked after every simulator call (never on cache hits).
  void set_callback(Callback cb) { callback_ = std::move(cb); }

  long calls() const { return calls_; }

  /// Residuals at theta; cached by the exact bit pattern of the reflected
  /// coordinates. A cache hit costs no simulator call.
  const Vec& residual(const Vec& theta) {
    const Vec x = reflect_ ? reflect_nonnegative(theta) : theta;
    const std::string key = key_of(x);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    if (budget_ >= 0 && calls_ >= budget_) throw budget_exhausted_error(budget_);
    Vec r = problem_.evaluate(x);
    return record(key, x, std::move(r));
  }

  double loss(const Vec& theta) { return guarded_objective(residual(theta)); }

  /// Batched evaluation: results in input order, cache misses evaluated
  /// (possibly concurrently) and recorded in input order so traces do not
  /// depend on thread scheduling. Throws after recording the affordable
  /// prefix if the budget runs out mid-batch.
  std::vector<Vec> residual_batch(const std::vector<Vec>& thetas) {
    struct Miss {
      std::size_t slot;
      std::string key;
      Vec x;
      Vec r;
    };
    std::vector<Vec> out(thetas.size());
    std::vector<Miss> misses;
    std::unordered_map<std::string, std::size_t> pending;  // key -> miss idx
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      const Vec x = reflect_ ? reflect_nonnegative(thetas[i]) : thetas[i];
      std::string key = key_of(x);
      if (auto it = cache_.find(key); it != cache_.end()) {
        out[i] = it->second;
      } else if (auto p = pending.find(key); p != pending.end()) {
        // duplicate inside the batch: evaluated once, filled in afterwards
        (void)p;
      } else {
        pending.emplace(key, misses.size());
        misses.push_back(Miss{i, std::move(key), x, Vec()});
      }
    }

    std::size_t affordable = misses.size();
    if (budget_ >= 0)
      affordable = std::min<std::size_t>(affordable,
                                         static_cast<std::size_t>(std::max<long>(0, budget_ - calls_)));

    const int threads = std::min<int>(thread_cap(), static_cast<int>(affordable));
    if (threads > 1) {
      std::vector<std::thread> pool;
      std::atomic<std::size_t> cursor{0};
      pool.reserve(threads);
      for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
          for (std::size_t j = cursor.fetch_add(1); j < affordable; j = cursor.fetch_add(1))
            misses[j].r = problem_.evaluate(misses[j].x);
        });
      for (auto& th : pool) th.join();
    } else {
      for (std::size_t j = 0; j < affordable; ++j)
        misses[j].r = problem_.evaluate(misses[j].x);
    }

    for (std::size_t j = 0; j < affordable; ++j)
      record(misses[j].key, misses[j].x, std::move(misses[j].r));
    // resolve every slot from the cache (covers in-batch duplicates)
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      if (out[i].size() != 0) continue;
      const Vec x = reflect_ ? reflect_nonnegative(thetas[i]) : thetas[i];
      auto it = cache_.find(key_of(x));
      if (it == cache_.end()) throw budget_exhausted_error(budget_);
      out[i] = it->second;
    }
    if (affordable < misses.size()) throw budget_exhausted_error(budget_);
    return out;
  }

  /// Loss functional suitable for handing to the direct-search solvers.
  std::function<double(const Vec&)> loss_fn() {
    return [this](const Vec& theta) { return loss(theta); };
  }

 private:
  static std::string key_of(const Vec& x) {
    std::string key(static_cast<std::size_t>(x.size()) * sizeof(double), '\0');
    std::memcpy(key.data(), x.data(), key.size());
    return key;
  }

  const Vec& record(const std::string& key, const Vec& x, Vec&& r) {
    ++calls_;
    const double l = guarded_objective(r);
    if (trace_ != nullptr)
      trace_->records.push_back(EvaluationRecord{calls_, x, l, phase_});
    if (callback_) callback_(calls_, x, l);
    return cache_.emplace(key, std::move(r)).first->second;
  }

  const ResidualProblem& problem_;
  OptimizationTrace* trace_;
  bool reflect_;
  Phase phase_ = Phase::Init;
  long budget_ = -1;
  long calls_ = 0;
  Callback callback_;
  std::unordered_map<std::string, Vec> cache_;
};

}  // namespace sloppyopt
