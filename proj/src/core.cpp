#include "ringbalance/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace ringbalance {

AllocationState AllocationState::initial(Weights w) {
  AllocationState state;
  state.total = std::accumulate(w.begin(), w.end(), std::int64_t{0});
  state.history.push_back(w);
  state.weights = std::move(w);
  return state;
}

EpochTiming EpochTiming::from_compute(std::vector<Duration> t_s, Duration t_c) {
  EpochTiming timing;
  const Duration slowest = t_s.empty() ? Duration{0} : *std::max_element(t_s.begin(), t_s.end());
  timing.t_c = t_c;
  timing.t_w.reserve(t_s.size());
  timing.total.reserve(t_s.size());
  for (Duration ts : t_s) {
    timing.t_w.push_back(slowest - ts);
    timing.total.push_back(ts + (slowest - ts) + t_c);
  }
  timing.t_s = std::move(t_s);
  return timing;
}

EpochTiming& EpochTiming::operator+=(const EpochTiming& other) {
  if (t_s.empty()) {
    *this = other;
    return *this;
  }
  if (other.t_s.size() != t_s.size()) {
    throw LengthMismatch("EpochTiming: worker count differs");
  }
  for (std::size_t i = 0; i < t_s.size(); ++i) {
    t_s[i] += other.t_s[i];
    t_w[i] += other.t_w[i];
    total[i] += other.total[i];
  }
  t_c += other.t_c;
  return *this;
}

void GradientBuffer::clear() {
  std::fill(values.begin(), values.end(), 0.0);
  sample_count = 0;
}

std::vector<std::string> validate(const ExperimentConfig& config) {
  std::vector<std::string> out;
  const auto n = static_cast<std::int64_t>(config.workers.size());
  if (n < 2) out.emplace_back("ring requires n >= 2");

  std::set<int> ranks;
  for (const auto& w : config.workers) {
    if (w.per_sample_cost.count() <= 0) {
      out.push_back("worker " + std::to_string(w.rank) + ": per_sample_cost must be positive");
    }
    if (!(w.jitter_sigma >= 0.0)) {
      out.push_back("worker " + std::to_string(w.rank) + ": jitter_sigma must be >= 0");
    }
    if (w.rank < 0 || w.rank >= n) {
      out.push_back("worker rank " + std::to_string(w.rank) + " outside [0, n)");
    }
    if (!ranks.insert(w.rank).second) {
      out.push_back("duplicate worker rank " + std::to_string(w.rank));
    }
  }

  if (!(config.learning_rate > 0.0)) out.emplace_back("learning_rate must be positive");
  if (!(config.weight_decay >= 0.0)) out.emplace_back("weight_decay must be >= 0");
  if (config.minibatch < 1) out.emplace_back("minibatch must be >= 1");
  if (config.epochs < 1) out.emplace_back("epochs must be >= 1");
  if (config.floor < 1) out.emplace_back("floor must be >= 1");
  if (config.total_weight < n * std::max<std::int64_t>(config.floor, 1)) {
    out.emplace_back("C must be at least n * floor");
  }
  if (config.link.latency.count() < 0) out.emplace_back("link latency must be >= 0");
  if (!(config.link.bandwidth > 0.0)) out.emplace_back("link bandwidth must be positive");
  if (config.stability.window < 2) out.emplace_back("stability window must be >= 2");
  if (config.stability.tolerance < 0) out.emplace_back("stability tolerance must be >= 0");
  if (!(config.ts_smoothing >= 0.0 && config.ts_smoothing < 1.0)) {
    out.emplace_back("ts_smoothing must be in [0, 1)");
  }

  auto check_weights = [&](const Weights& w, const std::string& what) {
    if (static_cast<std::int64_t>(w.size()) != n) {
      out.push_back(what + " must have one entry per worker");
      return;
    }
    std::int64_t sum = 0;
    for (auto x : w) {
      if (x < config.floor) out.push_back(what + " entries must be >= floor");
      sum += x;
    }
    if (sum != config.total_weight) out.push_back(what + " must sum to C");
  };
  if (config.mode.kind == RunModeKind::kStatic) check_weights(config.mode.static_weights, "static weights");
  if (config.initial_weights) check_weights(*config.initial_weights, "initial weights");

  const auto& ds = config.dataset;
  if (ds.source == DatasetSpec::Source::kSynthetic) {
    if (ds.features < 1) out.emplace_back("dataset features must be >= 1");
    if (ds.classes < 2) out.emplace_back("dataset classes must be >= 2");
    if (config.minibatch >= 1 && ds.size < config.total_weight * config.minibatch) {
      out.emplace_back("dataset size must hold at least one aggregation (C * minibatch samples)");
    }
  } else if (ds.csv_path.empty()) {
    out.emplace_back("csv dataset requires a path");
  }
  if (config.model.kind == ModelKind::kMlp && config.model.hidden < 1) {
    out.emplace_back("mlp hidden size must be >= 1");
  }
  return out;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLinearRegression: return "linear";
    case ModelKind::kSoftmax: return "softmax";
    case ModelKind::kMlp: return "mlp";
  }
  return "?";
}

std::string to_string(RunModeKind kind) {
  switch (kind) {
    case RunModeKind::kEqual: return "equal";
    case RunModeKind::kStatic: return "static";
    case RunModeKind::kAdaptive: return "adaptive";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "linear" || text == "linear_regression") return ModelKind::kLinearRegression;
  if (text == "softmax") return ModelKind::kSoftmax;
  if (text == "mlp") return ModelKind::kMlp;
  throw ConfigError("unknown model kind '" + text + "'");
}

RunModeKind parse_run_mode(const std::string& text) {
  if (text == "equal") return RunModeKind::kEqual;
  if (text == "static") return RunModeKind::kStatic;
  if (text == "adaptive") return RunModeKind::kAdaptive;
  throw ConfigError("unknown mode '" + text + "'");
}

}  // namespace ringbalance
