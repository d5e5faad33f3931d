#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ringbalance/core.hpp"

namespace ringbalance {

// Desk-scale models over a flat parameter vector.
//
//   linear:  y = w.x + b, loss (y - t)^2.                 params [w, b]
//   softmax: z = W x + b, loss -log softmax(z)[t].        params [W (K x d, row-major), b]
//   mlp:     h = tanh(W1 x + b1), z = W2 h + b2, softmax cross-entropy.
//                                                         params [W1 (H x d), b1, W2 (K x H), b2]
class Model {
 public:
  Model() = default;
  Model(ModelKind kind, int inputs, int outputs, int hidden = 0);

  // Parameters drawn from a seeded normal distribution scaled by fan-in.
  static Model initialized(ModelKind kind, int inputs, int outputs, int hidden, std::uint64_t seed);

  ModelKind kind() const { return kind_; }
  int inputs() const { return inputs_; }
  int outputs() const { return outputs_; }
  int hidden() const { return hidden_; }
  std::size_t param_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

 private:
  ModelKind kind_ = ModelKind::kSoftmax;
  int inputs_ = 0;
  int outputs_ = 0;
  int hidden_ = 0;
  std::vector<double> params_;
};

std::size_t param_count(ModelKind kind, int inputs, int outputs, int hidden);

struct SampleView {
  std::span<const double> x;
  double label = 0.0;  // class index for classifiers, target for regression
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(int features, int classes, std::vector<double> x, std::vector<double> y);

  std::size_t size() const { return labels_.size(); }
  int features() const { return features_; }
  int classes() const { return classes_; }
  SampleView sample(std::size_t i) const;

 private:
  int features_ = 0;
  int classes_ = 0;
  std::vector<double> x_;
  std::vector<double> labels_;
};

// Gaussian class clusters with unit variance around seeded means at distance
// `separation` from the origin; labels cycle through classes so they stay
// balanced, then the order is shuffled once with the same seed.
Dataset synthetic_dataset(std::int64_t size, int features, int classes, double separation, std::uint64_t seed);

// Header row, numeric feature columns, label in the last column.
Dataset load_csv_dataset(const std::string& path);

Dataset make_dataset(const DatasetSpec& spec);

// Output count a model needs for this dataset.
int model_outputs(ModelKind kind, const Dataset& data);

double loss(const Model& model, SampleView sample);

// Adds the gradient of the per-sample loss to `grad` and returns the loss.
double add_sample_gradient(const Model& model, SampleView sample, std::span<double> grad);

GradientBuffer per_sample_gradient(const Model& model, SampleView sample);

// Sum of per-sample gradients over the first w_i * minibatch samples. No
// parameter update.
GradientBuffer accumulate(const Model& model, std::span<const SampleView> samples, std::int64_t minibatch,
                          std::int64_t weight);

// params <- params - lr * (grad / N + weight_decay * params), N = sample_count.
Model sgd_step(Model model, const GradientBuffer& global_grad, double learning_rate, double weight_decay);
void sgd_step_in_place(Model& model, const GradientBuffer& global_grad, double learning_rate, double weight_decay);

// Per-worker slices of the dataset.
//
// Slice i is the contiguous slot range ranges[i] with length
// floor(D * w_i / C), the remainder going to the last rank. Slots are laid
// out aggregation-major: worker i's slots [k * w_i * mb, (k + 1) * w_i * mb)
// hold the samples of aggregation k at offset sum_{j<i} w_j * mb within that
// aggregation's block of C * mb consecutive samples. Every aggregation
// therefore covers the same global samples whatever the weights are. Slots
// past the last full aggregation hold the leftover samples in order.
struct Partition {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  Weights weights;
  std::int64_t minibatch = 1;
  std::size_t dataset_size = 0;

  std::size_t slice_size(std::size_t worker) const { return ranges[worker].second - ranges[worker].first; }
  std::size_t aggregations() const;
  // Global sample index held at a slot of a worker's slice.
  std::size_t sample_index(std::size_t worker, std::size_t slot) const;
  // Sample indices worker draws for aggregation k, wrapping within its slice.
  std::vector<std::size_t> aggregation_samples(std::size_t worker, std::size_t k) const;
};

// Slice geometry only; D < C is allowed and yields zero aggregations.
Partition partition(std::size_t dataset_size, const Weights& weights, std::int64_t minibatch = 1);
// Throws DatasetTooSmall if D < C.
Partition partition(const Dataset& dataset, const Weights& weights, std::int64_t minibatch = 1);

}  // namespace ringbalance
