#pragma once

// Per-epoch allocation bookkeeping shared by the simulator and the
// per-worker runner, so both make identical decisions from identical inputs.

#include <optional>
#include <vector>

#include "ringbalance/allocator.hpp"
#include "ringbalance/engine.hpp"

namespace ringbalance::detail {

class AllocationLoop {
 public:
  explicit AllocationLoop(const ExperimentConfig& config);

  const AllocationState& state() const { return state_; }
  bool adaptive() const { return adaptive_; }
  bool frozen() const { return frozen_; }
  std::optional<int> frozen_epoch() const { return frozen_epoch_; }

  // Whether the epoch about to start should rebalance first.
  bool wants_rebalance(int epoch) const { return adaptive_ && !frozen_ && epoch >= 2; }

  // Applies the update rule to last epoch's per-aggregation compute times.
  // Checks sum(w) == C and sum(u) == 0 and throws InvariantViolation if not.
  RebalanceRecord rebalance(int epoch, const std::vector<Duration>& mean_t_s);

 private:
  AllocationState state_;
  bool adaptive_;
  bool frozen_;
  std::optional<int> frozen_epoch_;
  std::int64_t floor_;
  StabilityRule stability_;
  double smoothing_;
  std::vector<double> per_sample_;  // smoothed seconds per sample
};

}  // namespace ringbalance::detail
