#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "ringbalance/engine.hpp"
#include "ringbalance/metrics.hpp"

using namespace ringbalance;
using namespace std::chrono_literals;

namespace {

ExperimentConfig cluster_config(std::vector<Duration> costs, RunModeKind mode = RunModeKind::kAdaptive) {
  ExperimentConfig c;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    c.workers.push_back(WorkerProfile{static_cast<int>(i), costs[i], 0.0});
  }
  c.mode.kind = mode;
  c.dataset.size = 400;
  c.epochs = 6;
  return c;
}

}  // namespace

TEST(Validate, Examples) {
  ExperimentConfig one = cluster_config({1ms});
  const auto v = validate(one);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v.front(), "ring requires n >= 2");

  ExperimentConfig st = cluster_config({1ms, 2ms}, RunModeKind::kStatic);
  st.mode.static_weights = {7, 13};
  EXPECT_TRUE(validate(st).empty());
  st.mode.static_weights = {7, 12};
  EXPECT_FALSE(validate(st).empty());

  ExperimentConfig lr = cluster_config({1ms, 2ms});
  lr.learning_rate = 0.0;
  const auto w = validate(lr);
  EXPECT_NE(std::find(w.begin(), w.end(), "learning_rate must be positive"), w.end());

  EXPECT_THROW(run_experiment(lr), ConfigError);
}

TEST(ComputeTime, Examples) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(compute_time(WorkerProfile{0, 2ms, 0.0}, 150, rng), 300ms);
  EXPECT_EQ(compute_time(WorkerProfile{0, 1ms, 0.0}, 0, rng), 0ms);
  EXPECT_THROW(compute_time(WorkerProfile{0, 1ms, 0.0}, -1, rng), std::invalid_argument);

  const WorkerProfile noisy{0, 1ms, 0.1};
  auto a = worker_rng(42, 0), b = worker_rng(42, 0), c = worker_rng(42, 1);
  const Duration x = compute_time(noisy, 100, a);
  EXPECT_EQ(x, compute_time(noisy, 100, b));
  EXPECT_NE(x, compute_time(noisy, 100, c));
  EXPECT_NE(x, 100ms);
  EXPECT_GT(x, 50ms);
  EXPECT_LT(x, 200ms);
}

TEST(WaitingTimes, Examples) {
  EXPECT_EQ(waiting_times(std::vector<Duration>{10ms, 20ms}), (std::vector<Duration>{10ms, 0ms}));
  EXPECT_EQ(waiting_times(std::vector<Duration>{5ms, 5ms, 5ms}), (std::vector<Duration>{0ms, 0ms, 0ms}));
  EXPECT_EQ(waiting_times(std::vector<Duration>{13ms, 14ms}), (std::vector<Duration>{1ms, 0ms}));
}

TEST(AllreduceTime, Examples) {
  const CostModel cm{1ms, 1e9};
  EXPECT_EQ(allreduce_time(4, 4'000'000, cm), 12ms);
  // 2(n-1)(a + L/n/b): n=2 moves 2 MB per step, n=4 moves 1 MB.
  EXPECT_EQ(allreduce_time(2, 4'000'000, cm), 2 * (1ms + 2ms));
  EXPECT_EQ(allreduce_time(4, 4'000'000, CostModel{0ms, 1e30}), 0ms);
  EXPECT_THROW(allreduce_time(1, 10, cm), std::invalid_argument);
}

TEST(WaitingImbalance, SumsOrderedPairs) {
  const auto t = EpochTiming::from_compute({10ms, 20ms, 15ms}, 1ms);
  // t_w = [10, 0, 5] ms: pairs |10|,|5|,|5| counted both ways.
  EXPECT_DOUBLE_EQ(waiting_imbalance(t), 2.0 * (10e6 + 5e6 + 5e6));
}

TEST(RunEpoch, OneAggregationByHand) {
  const Dataset d = synthetic_dataset(20, 4, 2, 4.0, 1);
  Cluster cl({WorkerProfile{0, 1ms, 0}, WorkerProfile{1, 2ms, 0}}, CostModel{0ms, 1e9}, 7);
  Model m = Model::initialized(ModelKind::kSoftmax, 4, 2, 0, 7);
  const auto part = partition(d, Weights{10, 10});
  const auto r = run_epoch(cl, m, d, part, TrainingParams{1, 0.1, 0.0}, 1);
  EXPECT_EQ(r.aggregations, 1u);
  EXPECT_EQ(r.timing.t_s, (std::vector<Duration>{10ms, 20ms}));
  EXPECT_EQ(r.timing.t_w, (std::vector<Duration>{10ms, 0ms}));
  EXPECT_EQ(r.timing.total[0], r.timing.total[1]);
}

TEST(RunEpoch, HomogeneousNoWaiting) {
  const Dataset d = synthetic_dataset(100, 4, 2, 4.0, 1);
  Cluster cl({WorkerProfile{0, 1ms, 0}, WorkerProfile{1, 1ms, 0}}, CostModel{50us, 1e9}, 7);
  Model m = Model::initialized(ModelKind::kSoftmax, 4, 2, 0, 7);
  const auto r = run_epoch(cl, m, d, partition(d, Weights{10, 10}), TrainingParams{}, 1);
  EXPECT_EQ(r.timing.t_w, (std::vector<Duration>{0ms, 0ms}));
  EXPECT_EQ(r.timing.total[0], r.timing.total[1]);
  EXPECT_EQ(r.aggregations, 5u);
}

// Training through the simulated cluster equals a single worker stepping over
// the same C*mb-sample batches.
TEST(RunEpoch, MatchesSingleWorkerWholeBatch) {
  const Dataset d = synthetic_dataset(240, 4, 3, 3.0, 5);
  const TrainingParams tp{2, 0.05, 1e-4};
  for (const Weights& w : {Weights{10, 10}, Weights{13, 7}, Weights{3, 9, 8}}) {
    std::vector<WorkerProfile> ws;
    for (std::size_t i = 0; i < w.size(); ++i) ws.push_back(WorkerProfile{static_cast<int>(i), 1ms, 0});
    Cluster cl(ws, CostModel{}, 1);
    Model m = Model::initialized(ModelKind::kMlp, 4, 3, 6, 3);
    Model oracle = m;
    for (int e = 1; e <= 3; ++e) run_epoch(cl, m, d, partition(d, w, tp.minibatch), tp, e);

    for (int e = 1; e <= 3; ++e) {
      for (std::size_t b = 0; b + 40 <= d.size(); b += 40) {
        GradientBuffer g(oracle.param_count());
        for (std::size_t i = b; i < b + 40; ++i) add_sample_gradient(oracle, d.sample(i), g.values);
        g.sample_count = 40;
        sgd_step_in_place(oracle, g, tp.learning_rate, tp.weight_decay);
      }
    }
    double worst = 0, scale = 0;
    for (std::size_t i = 0; i < m.param_count(); ++i) {
      worst = std::max(worst, std::abs(m.params()[i] - oracle.params()[i]));
      scale = std::max(scale, std::abs(oracle.params()[i]));
    }
    EXPECT_LT(worst / scale, 1e-9);
  }
}

TEST(RunExperiment, TwoToOneFreezesAtThirteenSeven) {
  const auto r = run_experiment(cluster_config({1ms, 2ms}));
  ASSERT_TRUE(r.frozen_epoch.has_value());
  EXPECT_LE(*r.frozen_epoch, 5);
  EXPECT_EQ(r.frozen_allocation, (Weights{13, 7}));
  EXPECT_EQ(r.allocation_history.front(), (Weights{10, 10}));
  EXPECT_EQ(r.epochs.back().weights, (Weights{13, 7}));
  // After freezing nothing rebalances.
  EXPECT_EQ(r.rebalances.back().epoch, *r.frozen_epoch);
  for (const auto& e : r.epochs) {
    if (e.epoch >= *r.frozen_epoch) {
      EXPECT_EQ(e.weights, (Weights{13, 7}));
    }
  }
}

TEST(RunExperiment, ThreeWorkersProportionalToRates) {
  const auto r = run_experiment(cluster_config({1ms, 1ms, 2ms}));
  EXPECT_EQ(r.frozen_allocation, (Weights{8, 8, 4}));
}

TEST(RunExperiment, EqualHomogeneousConstantEpochTime) {
  const auto r = run_experiment(cluster_config({1ms, 1ms}, RunModeKind::kEqual));
  for (const auto& e : r.epochs) EXPECT_EQ(e.epoch_time(), r.epochs.front().epoch_time());
  EXPECT_TRUE(r.rebalances.empty());
}

TEST(RunExperiment, WaitingImbalanceNonIncreasing) {
  for (auto costs : {std::vector<Duration>{1ms, 2ms}, std::vector<Duration>{1ms, 5ms},
                     std::vector<Duration>{1ms, 1ms, 2ms}, std::vector<Duration>{3ms, 1ms, 2ms, 7ms}}) {
    ExperimentConfig c = cluster_config(costs);
    const auto adaptive = run_experiment(c);
    c.mode.kind = RunModeKind::kEqual;
    const auto equal = run_experiment(c);
    double prev = waiting_imbalance(adaptive.epochs.front().timing);
    for (const auto& e : adaptive.epochs) {
      const double now = waiting_imbalance(e.timing);
      EXPECT_LE(now, prev);
      prev = now;
    }
    EXPECT_LE(waiting_imbalance(adaptive.epochs.back().timing), waiting_imbalance(equal.epochs.back().timing));
  }
}

TEST(RunExperiment, Deterministic) {
  ExperimentConfig c = cluster_config({1ms, 2ms, 3ms});
  for (auto& w : c.workers) w.jitter_sigma = 0.05;
  c.model.kind = ModelKind::kMlp;
  const auto a = to_json(run_experiment(c)).dump();
  const auto b = to_json(run_experiment(c)).dump();
  EXPECT_EQ(a, b);
  c.seed = 8;
  EXPECT_NE(a, to_json(run_experiment(c)).dump());
}

TEST(RunExperiment, SmoothingStillConverges) {
  ExperimentConfig c = cluster_config({1ms, 2ms});
  c.ts_smoothing = 0.5;
  c.epochs = 10;
  const auto r = run_experiment(c);
  ASSERT_TRUE(r.frozen_allocation.has_value());
  EXPECT_LE(std::abs(r.frozen_allocation->at(0) - 13), 1);
}

TEST(RunExperiment, DatasetTooSmall) {
  ExperimentConfig c = cluster_config({1ms, 2ms});
  EXPECT_THROW(run_experiment(c, synthetic_dataset(10, 4, 2, 1.0, 1)), DatasetTooSmall);
}
