#pragma once

#include <cstdint>
#include <vector>

#include "ringbalance/trainer.hpp"

namespace ringbalance {

// Central-difference gradient of the per-sample loss.
std::vector<double> numeric_gradient(const Model& model, SampleView sample, double eps = 1e-6);

struct GradcheckResult {
  int trials = 0;
  double max_relative_error = 0.0;
};

// Compares analytic and numeric gradients on `trials` random (params,
// sample) pairs. Error per trial is ||a - n|| / (||a|| + ||n||).
GradcheckResult gradcheck(ModelKind kind, int trials, std::uint64_t seed, double eps = 1e-6);

}  // namespace ringbalance
