#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "dpp/mdp.hpp"

namespace dpp {

/// One recorded checkpoint of a run. cpu_seconds counts the solver's own
/// updates only; sample generation and loss evaluation are excluded.
struct LossPoint {
  std::size_t iteration = 0;
  double cpu_seconds = 0.0;
  double loss = 0.0;

  friend bool operator==(const LossPoint&, const LossPoint&) = default;
};

/// What a solver loop records while it runs.
struct TrackingOptions {
  /// Reference Q*. No losses are recorded when null.
  const QTable* q_star = nullptr;
  /// Record every n-th iteration (the first and last iterations are always recorded).
  std::size_t loss_every = 1;
  /// Residual tolerance handed to evaluate_policy.
  double eval_tol = 1e-9;
  /// Stop early once the solver's cpu time exceeds this many seconds.
  std::optional<double> budget_seconds;
};

/// True when iteration k is a checkpoint of a K-iteration run.
inline bool is_checkpoint(std::size_t k, std::size_t K, std::size_t every) {
  return k == 0 || k == K || (every > 0 && k % every == 0);
}

/// Per-thread CPU time in seconds.
double thread_cpu_seconds() noexcept;

/// Accumulates CPU time over start/stop intervals.
class CpuStopwatch {
 public:
  void start() noexcept;
  void stop() noexcept;
  double seconds() const noexcept;

 private:
  double accumulated_ = 0.0;
  double started_at_ = 0.0;
  bool running_ = false;
};

}  // namespace dpp
