#include "ringbalance/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ringbalance {

std::vector<double> numeric_gradient(const Model& model, SampleView sample, double eps) {
  Model probe = model;
  auto p = probe.params();
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + eps;
    const double up = loss(probe, sample);
    p[i] = saved - eps;
    const double down = loss(probe, sample);
    p[i] = saved;
    out[i] = (up - down) / (2.0 * eps);
  }
  return out;
}

GradcheckResult gradcheck(ModelKind kind, int trials, std::uint64_t seed, double eps) {
  constexpr int kInputs = 5;
  constexpr int kClasses = 3;
  constexpr int kHidden = 6;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, kClasses - 1);

  const int outputs = kind == ModelKind::kLinearRegression ? 1 : kClasses;
  GradcheckResult result;
  for (int t = 0; t < trials; ++t) {
    Model model(kind, kInputs, outputs, kHidden);
    for (double& v : model.params()) v = 0.5 * normal(rng);
    std::vector<double> x(kInputs);
    for (double& v : x) v = normal(rng);
    const double y = kind == ModelKind::kLinearRegression ? normal(rng) : static_cast<double>(label(rng));
    const SampleView sample{x, y};

    const GradientBuffer analytic = per_sample_gradient(model, sample);
    const std::vector<double> numeric = numeric_gradient(model, sample, eps);
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      diff += (analytic.values[i] - numeric[i]) * (analytic.values[i] - numeric[i]);
      na += analytic.values[i] * analytic.values[i];
      nn += numeric[i] * numeric[i];
    }
    const double denom = std::sqrt(na) + std::sqrt(nn);
    const double err = denom > 0.0 ? std::sqrt(diff) / denom : 0.0;
    result.max_relative_error = std::max(result.max_relative_error, err);
    ++result.trials;
  }
  return result;
}

}  // namespace ringbalance
