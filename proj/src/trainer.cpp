#include "ringbalance/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ringbalance/kernels.hpp"

namespace ringbalance {
namespace {

void check_sample(const Model& model, SampleView sample) {
  if (static_cast<int>(sample.x.size()) != model.inputs()) {
    throw DimMismatch("sample has " + std::to_string(sample.x.size()) + " features, model expects " +
                      std::to_string(model.inputs()));
  }
}

std::size_t class_index(const Model& model, SampleView sample) {
  const double y = sample.label;
  if (!(y >= 0.0) || y != std::floor(y) || y >= model.outputs()) {
    throw DimMismatch("label " + std::to_string(y) + " is not a class in [0, " + std::to_string(model.outputs()) + ")");
  }
  return static_cast<std::size_t>(y);
}

// z <- W x + b for a row-major (rows x cols) weight block.
void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x, std::span<double> z) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < z.size(); ++r) z[r] = kernels::dot(w.subspan(r * cols, cols), x) + b[r];
}

// In-place softmax; returns log-sum-exp of the input.
double softmax(std::span<double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return top + std::log(sum);
}

struct MlpLayout {
  std::size_t w1, b1, w2, b2;
};

MlpLayout mlp_layout(const Model& m) {
  const auto d = static_cast<std::size_t>(m.inputs());
  const auto h = static_cast<std::size_t>(m.hidden());
  const auto k = static_cast<std::size_t>(m.outputs());
  MlpLayout l{};
  l.w1 = 0;
  l.b1 = h * d;
  l.w2 = l.b1 + h;
  l.b2 = l.w2 + k * h;
  return l;
}

// Shared forward/backward; grad may be empty for loss-only evaluation.
double evaluate(const Model& model, SampleView sample, std::span<double> grad) {
  check_sample(model, sample);
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != model.param_count()) {
    throw DimMismatch("gradient buffer length does not match model parameters");
  }
  const auto p = model.params();
  const auto d = static_cast<std::size_t>(model.inputs());

  switch (model.kind()) {
    case ModelKind::kLinearRegression: {
      const double pred = kernels::dot(p.first(d), sample.x) + p[d];
      const double err = pred - sample.label;
      if (want_grad) {
        kernels::axpy(grad.first(d), 2.0 * err, sample.x);
        grad[d] += 2.0 * err;
      }
      return err * err;
    }
    case ModelKind::kSoftmax: {
      const auto k = static_cast<std::size_t>(model.outputs());
      const std::size_t target = class_index(model, sample);
      std::vector<double> z(k);
      affine(p.first(k * d), p.subspan(k * d, k), sample.x, z);
      const double target_logit = z[target];
      const double lse = softmax(z);
      if (want_grad) {
        z[target] -= 1.0;
        for (std::size_t r = 0; r < k; ++r) {
          kernels::axpy(grad.subspan(r * d, d), z[r], sample.x);
          grad[k * d + r] += z[r];
        }
      }
      return lse - target_logit;
    }
    case ModelKind::kMlp: {
      const auto h = static_cast<std::size_t>(model.hidden());
      const auto k = static_cast<std::size_t>(model.outputs());
      const MlpLayout l = mlp_layout(model);
      const std::size_t target = class_index(model, sample);

      std::vector<double> act(h);
      affine(p.subspan(l.w1, h * d), p.subspan(l.b1, h), sample.x, act);
      for (double& a : act) a = std::tanh(a);

      std::vector<double> z(k);
      affine(p.subspan(l.w2, k * h), p.subspan(l.b2, k), act, z);
      const double target_logit = z[target];
      const double lse = softmax(z);
      if (want_grad) {
        z[target] -= 1.0;  // dL/dz
        std::vector<double> dh(h, 0.0);
        for (std::size_t r = 0; r < k; ++r) {
          kernels::axpy(grad.subspan(l.w2 + r * h, h), z[r], act);
          grad[l.b2 + r] += z[r];
          kernels::axpy(dh, z[r], p.subspan(l.w2 + r * h, h));
        }
        for (std::size_t j = 0; j < h; ++j) {
          const double da = dh[j] * (1.0 - act[j] * act[j]);
          kernels::axpy(grad.subspan(l.w1 + j * d, d), da, sample.x);
          grad[l.b1 + j] += da;
        }
      }
      return lse - target_logit;
    }
  }
  return 0.0;
}

}  // namespace

std::size_t param_count(ModelKind kind, int inputs, int outputs, int hidden) {
  const auto d = static_cast<std::size_t>(inputs);
  const auto k = static_cast<std::size_t>(outputs);
  const auto h = static_cast<std::size_t>(hidden);
  switch (kind) {
    case ModelKind::kLinearRegression: return d + 1;
    case ModelKind::kSoftmax: return k * d + k;
    case ModelKind::kMlp: return h * d + h + k * h + k;
  }
  return 0;
}

Model::Model(ModelKind kind, int inputs, int outputs, int hidden)
    : kind_(kind), inputs_(inputs), outputs_(outputs), hidden_(kind == ModelKind::kMlp ? hidden : 0) {
  if (inputs < 1) throw DimMismatch("model needs at least one input");
  if (kind == ModelKind::kLinearRegression && outputs != 1) throw DimMismatch("linear regression has one output");
  if (kind != ModelKind::kLinearRegression && outputs < 2) throw DimMismatch("classifier needs at least two classes");
  if (kind == ModelKind::kMlp && hidden < 1) throw DimMismatch("mlp needs at least one hidden unit");
  params_.assign(ringbalance::param_count(kind, inputs, outputs, hidden_), 0.0);
}

Model Model::initialized(ModelKind kind, int inputs, int outputs, int hidden, std::uint64_t seed) {
  Model m(kind, inputs, outputs, hidden);
  std::mt19937_64 rng(seed);
  if (kind == ModelKind::kMlp) {
    const MlpLayout l = mlp_layout(m);
    std::normal_distribution<double> first(0.0, 1.0 / std::sqrt(static_cast<double>(inputs)));
    std::normal_distribution<double> second(0.0, 1.0 / std::sqrt(static_cast<double>(m.hidden_)));
    for (std::size_t i = l.w1; i < l.b1; ++i) m.params_[i] = first(rng);
    for (std::size_t i = l.w2; i < l.b2; ++i) m.params_[i] = second(rng);
  } else {
    std::normal_distribution<double> dist(0.0, 0.01);
    for (double& v : m.params_) v = dist(rng);
  }
  return m;
}

Dataset::Dataset(int features, int classes, std::vector<double> x, std::vector<double> y)
    : features_(features), classes_(classes), x_(std::move(x)), labels_(std::move(y)) {
  if (features < 1) throw DimMismatch("dataset needs at least one feature");
  if (x_.size() != labels_.size() * static_cast<std::size_t>(features)) {
    throw DimMismatch("feature matrix does not match label count");
  }
}

SampleView Dataset::sample(std::size_t i) const {
  const auto d = static_cast<std::size_t>(features_);
  return SampleView{std::span<const double>(x_).subspan(i * d, d), labels_.at(i)};
}

int model_outputs(ModelKind kind, const Dataset& data) {
  return kind == ModelKind::kLinearRegression ? 1 : data.classes();
}

double loss(const Model& model, SampleView sample) { return evaluate(model, sample, {}); }

double add_sample_gradient(const Model& model, SampleView sample, std::span<double> grad) {
  return evaluate(model, sample, grad);
}

GradientBuffer per_sample_gradient(const Model& model, SampleView sample) {
  GradientBuffer g(model.param_count());
  add_sample_gradient(model, sample, g.values);
  g.sample_count = 1;
  return g;
}

GradientBuffer accumulate(const Model& model, std::span<const SampleView> samples, std::int64_t minibatch,
                          std::int64_t weight) {
  if (minibatch < 1 || weight < 0) throw std::invalid_argument("accumulate: minibatch >= 1 and weight >= 0 required");
  const auto needed = static_cast<std::size_t>(minibatch * weight);
  if (samples.size() < needed) {
    throw InsufficientSamples("accumulate: need " + std::to_string(needed) + " samples, got " +
                              std::to_string(samples.size()));
  }
  GradientBuffer g(model.param_count());
  for (std::size_t i = 0; i < needed; ++i) add_sample_gradient(model, samples[i], g.values);
  g.sample_count = static_cast<std::int64_t>(needed);
  return g;
}

void sgd_step_in_place(Model& model, const GradientBuffer& global_grad, double learning_rate, double weight_decay) {
  if (global_grad.sample_count <= 0) throw ZeroSampleCount("sgd_step: gradient carries no samples");
  if (global_grad.size() != model.param_count()) throw DimMismatch("sgd_step: gradient length mismatch");
  kernels::sgd_update(model.params(), global_grad.values, learning_rate,
                      static_cast<double>(global_grad.sample_count), weight_decay);
}

Model sgd_step(Model model, const GradientBuffer& global_grad, double learning_rate, double weight_decay) {
  sgd_step_in_place(model, global_grad, learning_rate, weight_decay);
  return model;
}

// ---------------------------------------------------------------------------
// Partition
// ---------------------------------------------------------------------------

std::size_t Partition::aggregations() const {
  const std::int64_t c = std::accumulate(weights.begin(), weights.end(), std::int64_t{0});
  return dataset_size / static_cast<std::size_t>(c * minibatch);
}

std::size_t Partition::sample_index(std::size_t worker, std::size_t slot) const {
  const auto mb = static_cast<std::size_t>(minibatch);
  const std::size_t per_agg = static_cast<std::size_t>(weights[worker]) * mb;
  const std::size_t block = static_cast<std::size_t>(std::accumulate(weights.begin(), weights.end(), std::int64_t{0})) * mb;
  const std::size_t full = aggregations();
  if (slot >= slice_size(worker)) throw std::out_of_range("Partition: slot outside slice");

  if (slot < full * per_agg) {
    std::size_t offset = 0;
    for (std::size_t j = 0; j < worker; ++j) offset += static_cast<std::size_t>(weights[j]) * mb;
    return (slot / per_agg) * block + offset + slot % per_agg;
  }
  std::size_t base = full * block;
  for (std::size_t j = 0; j < worker; ++j) base += slice_size(j) - full * static_cast<std::size_t>(weights[j]) * mb;
  return base + (slot - full * per_agg);
}

std::vector<std::size_t> Partition::aggregation_samples(std::size_t worker, std::size_t k) const {
  const std::size_t per_agg = static_cast<std::size_t>(weights[worker] * minibatch);
  const std::size_t len = slice_size(worker);
  std::vector<std::size_t> out;
  out.reserve(per_agg);
  if (len == 0) return out;
  for (std::size_t s = 0; s < per_agg; ++s) out.push_back(sample_index(worker, (k * per_agg + s) % len));
  return out;
}

Partition partition(std::size_t dataset_size, const Weights& weights, std::int64_t minibatch) {
  const std::int64_t c = std::accumulate(weights.begin(), weights.end(), std::int64_t{0});
  if (weights.empty() || c <= 0) throw std::invalid_argument("partition: weights must be positive");
  if (minibatch < 1) throw std::invalid_argument("partition: minibatch must be >= 1");
  Partition p;
  p.weights = weights;
  p.minibatch = minibatch;
  p.dataset_size = dataset_size;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    std::size_t len = dataset_size * static_cast<std::size_t>(weights[i]) / static_cast<std::size_t>(c);
    if (i + 1 == weights.size()) len = dataset_size - begin;
    p.ranges.emplace_back(begin, begin + len);
    begin += len;
  }
  return p;
}

Partition partition(const Dataset& dataset, const Weights& weights, std::int64_t minibatch) {
  const std::int64_t c = std::accumulate(weights.begin(), weights.end(), std::int64_t{0});
  if (dataset.size() < static_cast<std::size_t>(std::max<std::int64_t>(c, 0))) {
    throw DatasetTooSmall("partition: D=" + std::to_string(dataset.size()) + " < C=" + std::to_string(c));
  }
  return partition(dataset.size(), weights, minibatch);
}

}  // namespace ringbalance
