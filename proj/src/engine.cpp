#include "ringbalance/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "allocation_loop.hpp"
#include "ringbalance/collective.hpp"
#include "ringbalance/log.hpp"

namespace ringbalance {

Duration compute_time(const WorkerProfile& profile, std::int64_t samples, std::mt19937_64& rng) {
  if (samples < 0) throw std::invalid_argument("compute_time: negative sample count");
  const Duration base = profile.per_sample_cost * samples;
  if (profile.jitter_sigma <= 0.0) return base;
  std::lognormal_distribution<double> noise(0.0, profile.jitter_sigma);
  return Duration{std::llround(static_cast<double>(base.count()) * noise(rng))};
}

std::vector<Duration> waiting_times(std::span<const Duration> t_s) {
  std::vector<Duration> out;
  if (t_s.empty()) return out;
  const Duration slowest = *std::max_element(t_s.begin(), t_s.end());
  out.reserve(t_s.size());
  for (Duration d : t_s) out.push_back(slowest - d);
  return out;
}

Duration allreduce_time(int n, std::int64_t payload_bytes, const CostModel& cm) {
  if (n < 2) throw std::invalid_argument("allreduce_time: ring needs n >= 2");
  const double per_step_bytes = static_cast<double>(payload_bytes) / static_cast<double>(n);
  const auto transfer = Duration{std::llround(per_step_bytes / cm.bandwidth * 1e9)};
  return 2 * (n - 1) * (cm.latency + transfer);
}

double waiting_imbalance(const EpochTiming& timing) {
  double total = 0.0;
  for (std::size_t i = 0; i < timing.t_w.size(); ++i) {
    for (std::size_t j = 0; j < timing.t_w.size(); ++j) {
      if (i != j) total += std::abs(static_cast<double>((timing.t_w[i] - timing.t_w[j]).count()));
    }
  }
  return total;
}

std::mt19937_64 worker_rng(std::uint64_t seed, int rank) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(rank), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

std::vector<Duration> EpochReport::mean_compute_times() const {
  std::vector<Duration> out;
  const auto agg = static_cast<std::int64_t>(std::max<std::size_t>(aggregations, 1));
  for (Duration d : timing.t_s) out.push_back(Duration{d.count() / agg});
  return out;
}

Cluster::Cluster(std::vector<WorkerProfile> workers, CostModel link, std::uint64_t seed)
    : workers_(std::move(workers)), link_(link), hub_(static_cast<int>(workers_.size())) {
  rngs_.reserve(workers_.size());
  for (const auto& w : workers_) rngs_.push_back(worker_rng(seed, w.rank));
}

EpochReport run_epoch(Cluster& cluster, Model& model, const Dataset& data, const Partition& part,
                      const TrainingParams& params, int epoch) {
  const int n = cluster.size();
  const auto un = static_cast<std::size_t>(n);
  if (part.weights.size() != un) throw LengthMismatch("run_epoch: partition does not match cluster size");

  const std::int64_t total_weight = std::accumulate(part.weights.begin(), part.weights.end(), std::int64_t{0});
  const std::int64_t batch = total_weight * params.minibatch;
  const auto payload = static_cast<std::int64_t>(model.param_count() * sizeof(double));
  const Duration t_c = allreduce_time(n, payload, cluster.link());

  EpochReport report;
  report.epoch = epoch;
  report.weights = part.weights;
  report.aggregations = part.aggregations();

  std::vector<GradientBuffer> buffers(un, GradientBuffer(model.param_count()));
  std::vector<double> loss_sums(un, 0.0);
  std::vector<Duration> t_s(un);

  for (std::size_t k = 0; k < report.aggregations; ++k) {
    for (std::size_t i = 0; i < un; ++i) {
      auto& buf = buffers[i];
      buf.clear();
      for (std::size_t idx : part.aggregation_samples(i, k)) {
        loss_sums[i] += add_sample_gradient(model, data.sample(idx), buf.values);
        ++buf.sample_count;
      }
      t_s[i] = compute_time(cluster.workers()[i], part.weights[i] * params.minibatch, cluster.rng(static_cast<int>(i)));
    }

    EpochTiming step = EpochTiming::from_compute(t_s, t_c);
    for (std::size_t i = 1; i < un; ++i) {
      if (step.total[i] != step.total[0]) throw InvariantViolation("aggregation totals differ across ranks");
    }
    if (*std::min_element(step.t_w.begin(), step.t_w.end()) != Duration{0}) {
      throw InvariantViolation("no worker reached the barrier last");
    }
    report.timing += step;

    ring_allreduce_lockstep(buffers, cluster.hub());
    for (std::size_t i = 0; i < un; ++i) {
      if (buffers[i].sample_count != batch || buffers[i].values != buffers[0].values) {
        throw InvariantViolation("allreduce replicas diverged at aggregation " + std::to_string(k));
      }
    }
    sgd_step_in_place(model, buffers[0], params.learning_rate, params.weight_decay);
  }

  const double consumed = static_cast<double>(report.aggregations) * static_cast<double>(batch);
  const double loss_sum = std::accumulate(loss_sums.begin(), loss_sums.end(), 0.0);
  report.loss = consumed > 0.0 ? loss_sum / consumed : 0.0;
  if (report.timing.t_s.empty()) report.timing = EpochTiming::from_compute(std::vector<Duration>(un), Duration{0});
  return report;
}

Weights initial_weights(const ExperimentConfig& config) {
  switch (config.mode.kind) {
    case RunModeKind::kStatic:
      return config.mode.static_weights;
    case RunModeKind::kAdaptive:
      if (config.initial_weights) return *config.initial_weights;
      [[fallthrough]];
    case RunModeKind::kEqual:
      break;
  }
  return equal_weights(config.workers.size(), config.total_weight);
}

namespace detail {

AllocationLoop::AllocationLoop(const ExperimentConfig& config)
    : state_(AllocationState::initial(initial_weights(config))),
      adaptive_(config.mode.kind == RunModeKind::kAdaptive),
      frozen_(!adaptive_),
      frozen_epoch_(adaptive_ ? std::nullopt : std::optional<int>(1)),
      floor_(config.floor),
      stability_(config.stability),
      smoothing_(config.ts_smoothing) {}

RebalanceRecord AllocationLoop::rebalance(int epoch, const std::vector<Duration>& mean_t_s) {
  const auto n = state_.weights.size();
  std::vector<Duration> used = mean_t_s;
  if (smoothing_ > 0.0) {
    // Smooth per-sample time rather than t_s itself: t_s scales with w, which
    // just changed.
    std::vector<double> current(n);
    for (std::size_t i = 0; i < n; ++i) current[i] = to_seconds(mean_t_s[i]) / static_cast<double>(state_.weights[i]);
    if (per_sample_.empty()) per_sample_ = current;
    for (std::size_t i = 0; i < n; ++i) {
      per_sample_[i] = smoothing_ * per_sample_[i] + (1.0 - smoothing_) * current[i];
      used[i] = Duration{std::llround(per_sample_[i] * static_cast<double>(state_.weights[i]) * 1e9)};
    }
  }

  const Rebalance rb = ringbalance::rebalance(state_, used, floor_);
  const std::int64_t sum = std::accumulate(rb.next.weights.begin(), rb.next.weights.end(), std::int64_t{0});
  if (sum != state_.total) throw InvariantViolation("rebalance changed C");
  if (std::abs(rb.u.sum()) > 1e-9 * std::max(1.0, static_cast<double>(state_.total))) {
    throw InvariantViolation("increments do not sum to zero");
  }

  RebalanceRecord rec;
  rec.epoch = epoch;
  rec.t_s = used;
  rec.rates = rb.v.v;
  rec.increments = rb.u.u;
  rec.target = rb.target;
  rec.before = state_.weights;
  rec.after = rb.next.weights;

  state_ = rb.next;
  if (is_stable(state_.history, stability_.window, stability_.tolerance)) {
    frozen_ = true;
    frozen_epoch_ = epoch;
    rec.froze = true;
  }
  return rec;
}

}  // namespace detail

ExperimentReport run_experiment(const ExperimentConfig& config) {
  if (auto problems = validate(config); !problems.empty()) throw ConfigError("invalid config: " + problems.front());
  return run_experiment(config, make_dataset(config.dataset));
}

ExperimentReport run_experiment(const ExperimentConfig& config, const Dataset& data) {
  if (auto problems = validate(config); !problems.empty()) throw ConfigError("invalid config: " + problems.front());
  if (data.size() < static_cast<std::size_t>(config.total_weight * config.minibatch)) {
    throw DatasetTooSmall("dataset holds fewer samples than one aggregation");
  }

  ExperimentReport report;
  report.config = config;

  const int outputs = model_outputs(config.model.kind, data);
  Model model = Model::initialized(config.model.kind, data.features(), outputs, config.model.hidden, config.seed);
  Cluster cluster(config.workers, config.link, config.seed);
  detail::AllocationLoop loop(config);
  const TrainingParams params{config.minibatch, config.learning_rate, config.weight_decay};

  Partition part = partition(data, loop.state().weights, config.minibatch);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (loop.wants_rebalance(epoch)) {
      // Every rank broadcasts last epoch's mean compute time.
      const auto last = report.epochs.back().mean_compute_times();
      std::vector<double> locals;
      for (Duration d : last) locals.push_back(static_cast<double>(d.count()));
      const auto gathered = allgather_scalar_lockstep(locals, cluster.hub()).front();
      std::vector<Duration> t_s;
      for (double v : gathered) t_s.push_back(Duration{static_cast<std::int64_t>(v)});

      RebalanceRecord rec = loop.rebalance(epoch, t_s);
      log::debug("epoch {}: rebalance -> {}", epoch, fmt_weights(rec.after));
      report.rebalances.push_back(std::move(rec));
      part = partition(data, loop.state().weights, config.minibatch);
    }
    report.epochs.push_back(run_epoch(cluster, model, data, part, params, epoch));
    const auto& e = report.epochs.back();
    log::info("epoch {} w={} T={}ns loss={}", epoch, fmt_weights(e.weights), e.epoch_time().count(), e.loss);
    report.virtual_time += e.epoch_time();
  }

  report.allocation_history = loop.state().history;
  report.frozen_epoch = loop.frozen_epoch();
  if (loop.frozen()) report.frozen_allocation = loop.state().weights;
  report.final_loss = report.epochs.empty() ? 0.0 : report.epochs.back().loss;
  report.final_params.assign(model.params().begin(), model.params().end());
  return report;
}

}  // namespace ringbalance
