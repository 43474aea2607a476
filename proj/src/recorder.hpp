#pragma once

// Checkpoint bookkeeping shared by the solver loops.

#include <optional>
#include <utility>
#include <vector>

#include "dpp/mdp.hpp"
#include "dpp/trajectory.hpp"

namespace dpp::detail {

class LossRecorder {
 public:
  LossRecorder(const TabularMdp& mdp, const TrackingOptions& tracking, std::size_t iterations)
      : tracking_(tracking), iterations_(iterations) {
    if (tracking.q_star != nullptr) evaluator_.emplace(mdp, *tracking.q_star, tracking.eval_tol);
  }

  bool over_budget(const CpuStopwatch& watch) const {
    return tracking_.budget_seconds && watch.seconds() > *tracking_.budget_seconds;
  }

  /// Records iteration k if it is a checkpoint (or `force`). `make_policy` is
  /// only invoked when a loss is actually computed. The stopwatch is paused
  /// while the policy is evaluated.
  template <class MakePolicy>
  void record(std::size_t k, CpuStopwatch& watch, MakePolicy&& make_policy, bool force = false) {
    if (!evaluator_) return;
    if (!force && !is_checkpoint(k, iterations_, tracking_.loss_every)) return;
    if (!points_.empty() && points_.back().iteration == k) return;
    watch.stop();
    const double cpu = watch.seconds();
    const double loss = (*evaluator_)(std::forward<MakePolicy>(make_policy)());
    points_.push_back({k, cpu, loss});
    watch.start();
  }

  std::vector<LossPoint> take() { return std::move(points_); }

 private:
  TrackingOptions tracking_;
  std::size_t iterations_;
  std::optional<PolicyLossEvaluator> evaluator_;
  std::vector<LossPoint> points_;
};

}  // namespace dpp::detail
