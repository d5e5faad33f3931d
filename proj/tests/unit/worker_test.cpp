#include <gtest/gtest.h>

#include <thread>

#include "ringbalance/engine.hpp"

using namespace ringbalance;
using namespace std::chrono_literals;

namespace {

ExperimentConfig config(std::vector<Duration> costs, double sigma) {
  ExperimentConfig c;
  for (std::size_t i = 0; i < costs.size(); ++i) c.workers.push_back(WorkerProfile{static_cast<int>(i), costs[i], sigma});
  c.dataset.size = 300;
  c.epochs = 5;
  c.model.kind = ModelKind::kMlp;
  c.model.hidden = 5;
  return c;
}

void expect_same_run(const ExperimentReport& sim, const std::vector<WorkerReport>& ranks) {
  for (const auto& w : ranks) {
    EXPECT_EQ(w.allocation_history, sim.allocation_history);
    EXPECT_EQ(w.frozen_epoch, sim.frozen_epoch);
    EXPECT_EQ(w.final_params, sim.final_params);
    ASSERT_EQ(w.epochs.size(), sim.epochs.size());
    for (std::size_t e = 0; e < w.epochs.size(); ++e) {
      EXPECT_EQ(w.epochs[e].weights, sim.epochs[e].weights);
      EXPECT_EQ(w.epochs[e].compute, sim.epochs[e].timing.t_s[static_cast<std::size_t>(w.rank)]);
      EXPECT_EQ(w.epochs[e].loss, sim.epochs[e].loss);
    }
  }
}

}  // namespace

// One thread per rank over the in-memory transport reproduces the simulator
// exactly, jitter included.
TEST(RunWorker, InMemoryMatchesSimulation) {
  const ExperimentConfig c = config({1ms, 2ms, 3ms}, 0.05);
  const Dataset d = make_dataset(c.dataset);
  const ExperimentReport sim = run_experiment(c, d);

  InMemoryHub hub(3);
  std::vector<WorkerReport> out(3);
  std::vector<std::thread> ts;
  for (int r = 0; r < 3; ++r) ts.emplace_back([&, r] { out[r] = run_worker(c, d, hub.endpoint(r)); });
  for (auto& t : ts) t.join();
  expect_same_run(sim, out);
}

TEST(RunWorker, TcpMatchesSimulation) {
  const ExperimentConfig c = config({1ms, 2ms}, 0.0);
  const Dataset d = make_dataset(c.dataset);
  const ExperimentReport sim = run_experiment(c, d);

  std::vector<PeerAddress> peers;
  std::vector<int> fds;
  for (int r = 0; r < 2; ++r) {
    auto [fd, port] = tcp_listen({"127.0.0.1", 0});
    fds.push_back(fd);
    peers.push_back({"127.0.0.1", port});
  }
  std::vector<WorkerReport> out(2);
  std::vector<std::thread> ts;
  for (int r = 0; r < 2; ++r) {
    ts.emplace_back([&, r] {
      TcpTransport t(r, peers, 5000, fds[r]);
      out[r] = run_worker(c, d, t);
    });
  }
  for (auto& t : ts) t.join();
  expect_same_run(sim, out);
  EXPECT_EQ(out[0].allocation_history.back(), (Weights{13, 7}));
}

// Real sleeps: measured compute time is at least the modelled one.
TEST(RunWorker, WallClockMode) {
  ExperimentConfig c = config({20us, 40us}, 0.0);
  c.dataset.size = 100;
  c.epochs = 3;
  const Dataset d = make_dataset(c.dataset);
  InMemoryHub hub(2);
  std::vector<WorkerReport> out(2);
  std::vector<std::thread> ts;
  for (int r = 0; r < 2; ++r) {
    ts.emplace_back([&, r] { out[r] = run_worker(c, d, hub.endpoint(r), WorkerOptions{true}); });
  }
  for (auto& t : ts) t.join();
  // 5 aggregations of 10 samples at 20us and 40us.
  EXPECT_GE(out[0].epochs[0].compute, 1ms);
  EXPECT_GE(out[1].epochs[0].compute, 2ms);
  EXPECT_EQ(out[0].allocation_history, out[1].allocation_history);
  EXPECT_EQ(out[0].final_params, out[1].final_params);
}

TEST(RunWorker, RejectsRingSizeMismatch) {
  const ExperimentConfig c = config({1ms, 2ms, 3ms}, 0.0);
  InMemoryHub hub(2);
  EXPECT_THROW(run_worker(c, make_dataset(c.dataset), hub.endpoint(0)), ConfigError);
}
