#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "ringbalance/trainer.hpp"

namespace ringbalance {

Dataset synthetic_dataset(std::int64_t size, int features, int classes, double separation, std::uint64_t seed) {
  if (size < 1 || features < 1 || classes < 2) {
    throw std::invalid_argument("synthetic_dataset: need size >= 1, features >= 1, classes >= 2");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<std::size_t>(features);
  const auto n = static_cast<std::size_t>(size);

  std::vector<double> means(static_cast<std::size_t>(classes) * d);
  for (int k = 0; k < classes; ++k) {
    double norm = 0.0;
    auto mean = std::span(means).subspan(static_cast<std::size_t>(k) * d, d);
    for (double& v : mean) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : mean) v *= separation / norm;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<double> x(n * d);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = order[i] % static_cast<std::size_t>(classes);
    y[i] = static_cast<double>(k);
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = means[k * d + j] + normal(rng);
  }
  return Dataset(features, classes, std::move(x), std::move(y));
}

Dataset load_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset '" + path + "' is empty");
  const auto columns = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 2) throw ConfigError("dataset '" + path + "' needs at least one feature and a label");

  std::vector<double> x;
  std::vector<double> y;
  double max_label = 0.0;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(row) + ": '" + cell + "' is not a number");
      }
      if (col + 1 < columns) {
        x.push_back(v);
      } else {
        y.push_back(v);
        max_label = std::max(max_label, v);
      }
      ++col;
    }
    if (col != columns) {
      throw DimMismatch(path + ":" + std::to_string(row) + ": expected " + std::to_string(columns) + " columns");
    }
  }
  // Integer labels imply a class count; regression targets just get two.
  const int classes = std::max(2, static_cast<int>(max_label) + 1);
  return Dataset(columns - 1, classes, std::move(x), std::move(y));
}

Dataset make_dataset(const DatasetSpec& spec) {
  if (spec.source == DatasetSpec::Source::kCsv) return load_csv_dataset(spec.csv_path);
  return synthetic_dataset(spec.size, spec.features, spec.classes, spec.separation, spec.seed);
}

}  // namespace ringbalance
