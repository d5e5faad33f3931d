#include <chrono>
#include <numeric>
#include <thread>

#include "allocation_loop.hpp"
#include "ringbalance/collective.hpp"
#include "ringbalance/engine.hpp"
#include "ringbalance/log.hpp"

namespace ringbalance {

WorkerReport run_worker(const ExperimentConfig& config, const Dataset& data, Transport& transport,
                        const WorkerOptions& options) {
  if (auto problems = validate(config); !problems.empty()) throw ConfigError("invalid config: " + problems.front());
  const int n = transport.size();
  if (n != static_cast<int>(config.workers.size())) throw ConfigError("transport ring size differs from worker count");
  const RingPosition pos(transport.rank(), n);
  const auto me = static_cast<std::size_t>(pos.rank);
  const WorkerProfile& profile = config.workers[me];

  const int outputs = model_outputs(config.model.kind, data);
  Model model = Model::initialized(config.model.kind, data.features(), outputs, config.model.hidden, config.seed);
  std::mt19937_64 rng = worker_rng(config.seed, profile.rank);
  detail::AllocationLoop loop(config);
  const auto payload = static_cast<std::int64_t>(model.param_count() * sizeof(double));
  const Duration modelled_sync = allreduce_time(n, payload, config.link);

  WorkerReport report;
  report.rank = pos.rank;
  Partition part = partition(data, loop.state().weights, config.minibatch);
  Duration last_mean_compute{0};

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (loop.wants_rebalance(epoch)) {
      const auto gathered = allgather_scalar(static_cast<double>(last_mean_compute.count()), pos, transport);
      std::vector<Duration> t_s;
      for (double v : gathered) t_s.push_back(Duration{static_cast<std::int64_t>(v)});
      loop.rebalance(epoch, t_s);
      part = partition(data, loop.state().weights, config.minibatch);
    }

    WorkerEpoch record;
    record.epoch = epoch;
    record.weights = loop.state().weights;
    const std::int64_t mine = record.weights[me] * config.minibatch;
    const std::size_t aggregations = part.aggregations();
    double loss_sum = 0.0;

    for (std::size_t k = 0; k < aggregations; ++k) {
      const auto start = std::chrono::steady_clock::now();
      GradientBuffer buf(model.param_count());
      for (std::size_t idx : part.aggregation_samples(me, k)) {
        loss_sum += add_sample_gradient(model, data.sample(idx), buf.values);
        ++buf.sample_count;
      }
      Duration t_s = compute_time(profile, mine, rng);
      if (options.wall_clock) {
        std::this_thread::sleep_until(start + t_s);
        t_s = std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - start);
      }
      record.compute += t_s;

      const auto barrier = std::chrono::steady_clock::now();
      GradientBuffer global = ring_allreduce(std::move(buf), pos, transport);
      if (options.wall_clock) {
        record.sync += std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - barrier);
      } else {
        // Waiting time is unknown locally until peers report; the modelled
        // aggregation time is what the virtual clock charges.
        record.sync += modelled_sync;
      }
      sgd_step_in_place(model, global, config.learning_rate, config.weight_decay);
    }

    // Global epoch loss, summed in rank order like the simulator does.
    const auto sums = allgather_scalar(loss_sum, pos, transport);
    const double consumed = static_cast<double>(aggregations) * static_cast<double>(loop.state().total * config.minibatch);
    record.loss = consumed > 0.0 ? std::accumulate(sums.begin(), sums.end(), 0.0) / consumed : 0.0;

    const auto agg = static_cast<std::int64_t>(std::max<std::size_t>(aggregations, 1));
    last_mean_compute = Duration{record.compute.count() / agg};
    log::info("rank {} epoch {} w={} t_s={}ns loss={}", pos.rank, epoch, fmt_weights(record.weights),
              record.compute.count(), record.loss);
    report.epochs.push_back(std::move(record));
  }

  report.allocation_history = loop.state().history;
  report.frozen_epoch = loop.frozen_epoch();
  report.final_params.assign(model.params().begin(), model.params().end());
  return report;
}

}  // namespace ringbalance
