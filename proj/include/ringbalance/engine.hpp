#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ringbalance/allocator.hpp"
#include "ringbalance/core.hpp"
#include "ringbalance/trainer.hpp"
#include "ringbalance/transport.hpp"

namespace ringbalance {

// samples * per_sample_cost, scaled by a lognormal(0, jitter_sigma) factor
// when jitter is on. Draws from rng only when jitter_sigma > 0.
Duration compute_time(const WorkerProfile& profile, std::int64_t samples, std::mt19937_64& rng);

// t_w_i = max_j t_s_j - t_s_i.
std::vector<Duration> waiting_times(std::span<const Duration> t_s);

// 2(n-1) * (latency + (payload_bytes / n) / bandwidth): the same for every
// rank.
Duration allreduce_time(int n, std::int64_t payload_bytes, const CostModel& cm);

// sum over ordered pairs i != j of |t_w_i - t_w_j|, in nanoseconds.
double waiting_imbalance(const EpochTiming& timing);

// Jitter stream for one worker; shared by the simulator and distributed
// workers so both draw the same noise.
std::mt19937_64 worker_rng(std::uint64_t seed, int rank);

struct EpochReport {
  int epoch = 0;  // 1-based
  Weights weights;
  EpochTiming timing;  // summed over the epoch's aggregations
  std::size_t aggregations = 0;
  double loss = 0.0;  // mean training loss over consumed samples

  // Time workers spend before the barrier releases, summed over aggregations.
  Duration compute_time() const { return timing.total.empty() ? Duration{0} : timing.total[0] - timing.t_c; }
  Duration epoch_time() const { return timing.total.empty() ? Duration{0} : timing.total[0]; }
  std::vector<Duration> mean_compute_times() const;
};

struct RebalanceRecord {
  int epoch = 0;  // first epoch trained with `after`
  std::vector<Duration> t_s;  // per-aggregation compute times fed to the update
  std::vector<double> rates;
  std::vector<double> increments;
  std::vector<double> target;
  Weights before;
  Weights after;
  bool froze = false;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<EpochReport> epochs;
  std::vector<Weights> allocation_history;
  std::vector<RebalanceRecord> rebalances;
  std::optional<Weights> frozen_allocation;
  std::optional<int> frozen_epoch;
  Duration virtual_time{0};
  double final_loss = 0.0;
  std::vector<double> final_params;
};

// Simulated workers sharing one in-memory ring.
class Cluster {
 public:
  Cluster(std::vector<WorkerProfile> workers, CostModel link, std::uint64_t seed);

  int size() const { return static_cast<int>(workers_.size()); }
  const std::vector<WorkerProfile>& workers() const { return workers_; }
  const CostModel& link() const { return link_; }
  std::mt19937_64& rng(int rank) { return rngs_[static_cast<std::size_t>(rank)]; }
  InMemoryHub& hub() { return hub_; }

 private:
  std::vector<WorkerProfile> workers_;
  CostModel link_;
  std::vector<std::mt19937_64> rngs_;
  InMemoryHub hub_;
};

struct TrainingParams {
  std::int64_t minibatch = 1;
  double learning_rate = 1e-2;
  double weight_decay = 0.0;
};

// One epoch of floor(D / (C * minibatch)) aggregations on the virtual clock.
// Every worker accumulates its w_i * minibatch samples, the barrier sets t_w,
// the ring allreduce sums the buffers and one SGD step with N = C * minibatch
// updates the model. Throws InvariantViolation if per-aggregation timing
// breaks T_i == T_j or the replicas diverge.
EpochReport run_epoch(Cluster& cluster, Model& model, const Dataset& data, const Partition& part,
                      const TrainingParams& params, int epoch);

// Runs the whole allocation loop. Throws ConfigError if validate() reports
// violations.
ExperimentReport run_experiment(const ExperimentConfig& config);
ExperimentReport run_experiment(const ExperimentConfig& config, const Dataset& data);

Weights initial_weights(const ExperimentConfig& config);

// --- One execution unit per worker -----------------------------------------

struct WorkerEpoch {
  int epoch = 0;
  Weights weights;
  Duration compute{0};  // this worker's t_s summed over aggregations
  Duration sync{0};     // barrier wait plus allreduce, measured or modelled
  double loss = 0.0;    // global epoch mean, agreed through allgather
};

struct WorkerReport {
  int rank = 0;
  std::vector<WorkerEpoch> epochs;
  std::vector<Weights> allocation_history;
  std::optional<int> frozen_epoch;
  std::vector<double> final_params;
};

struct WorkerOptions {
  // Sleep for the modelled compute time and measure real durations instead
  // of using the virtual clock.
  bool wall_clock = false;
};

// The same allocation loop as run_experiment, driven from a single rank over
// any transport. Compute times are exchanged with allgather_scalar and every
// rank derives the identical new allocation.
WorkerReport run_worker(const ExperimentConfig& config, const Dataset& data, Transport& transport,
                        const WorkerOptions& options = {});

}  // namespace ringbalance
