#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "ringbalance/gradcheck.hpp"
#include "ringbalance/trainer.hpp"

using namespace ringbalance;

namespace {

double rel_diff(std::span<const double> a, std::span<const double> b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / std::max(den, 1e-300);
}

Dataset tiny_regression() {
  // y = 2x + 1
  std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  return Dataset(1, 2, x, y);
}

}  // namespace

TEST(Model, ParamCounts) {
  EXPECT_EQ(param_count(ModelKind::kLinearRegression, 4, 1, 0), 5u);
  EXPECT_EQ(param_count(ModelKind::kSoftmax, 4, 3, 0), 15u);
  EXPECT_EQ(param_count(ModelKind::kMlp, 4, 3, 8), 4u * 8 + 8 + 3 * 8 + 3);
  EXPECT_THROW(Model(ModelKind::kLinearRegression, 2, 2), DimMismatch);
  EXPECT_THROW(Model(ModelKind::kSoftmax, 2, 1), DimMismatch);
  EXPECT_THROW(Model(ModelKind::kMlp, 2, 2, 0), DimMismatch);
}

TEST(Model, SeededInitIsReproducible) {
  const Model a = Model::initialized(ModelKind::kMlp, 4, 3, 8, 5);
  const Model b = Model::initialized(ModelKind::kMlp, 4, 3, 8, 5);
  const Model c = Model::initialized(ModelKind::kMlp, 4, 3, 8, 6);
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
}

TEST(Gradient, LinearRegressionByHand) {
  Model m(ModelKind::kLinearRegression, 1, 1);
  const std::vector<double> x{1.0};
  const auto g = per_sample_gradient(m, SampleView{x, 2.0});
  EXPECT_EQ(g.values, (std::vector<double>{-4.0, -4.0}));
  EXPECT_EQ(g.sample_count, 1);
  EXPECT_EQ(loss(m, SampleView{x, 2.0}), 4.0);
}

TEST(Gradient, SoftmaxZeroParamsUniform) {
  for (int k : {2, 3, 5}) {
    Model m(ModelKind::kSoftmax, 3, k);
    const std::vector<double> x{0.3, -1.0, 2.0};
    const int target = k - 1;
    const auto g = per_sample_gradient(m, SampleView{x, static_cast<double>(target)});
    EXPECT_NEAR(loss(m, SampleView{x, static_cast<double>(target)}), std::log(k), 1e-12);
    const std::size_t bias = static_cast<std::size_t>(3 * k);
    for (int c = 0; c < k; ++c) {
      const double want = 1.0 / k - (c == target ? 1.0 : 0.0);
      EXPECT_NEAR(g.values[bias + c], want, 1e-12);
    }
  }
}

TEST(Gradient, RejectsBadShapes) {
  Model m(ModelKind::kSoftmax, 3, 2);
  const std::vector<double> x{1, 2};
  EXPECT_THROW(per_sample_gradient(m, SampleView{x, 0}), DimMismatch);
  const std::vector<double> x3{1, 2, 3};
  EXPECT_THROW(per_sample_gradient(m, SampleView{x3, 2}), DimMismatch);
  EXPECT_THROW(per_sample_gradient(m, SampleView{x3, 0.5}), DimMismatch);
}

TEST(Gradient, FiniteDifferencesAllModels) {
  for (ModelKind k : {ModelKind::kLinearRegression, ModelKind::kSoftmax, ModelKind::kMlp}) {
    const auto r = gradcheck(k, 100, 7, 1e-6);
    EXPECT_EQ(r.trials, 100);
    EXPECT_LT(r.max_relative_error, 1e-4) << to_string(k);
  }
}

TEST(Gradient, GradcheckCatchesWrongGradient) {
  // A numeric gradient against a deliberately perturbed analytic one.
  Model m = Model::initialized(ModelKind::kSoftmax, 3, 2, 0, 1);
  const std::vector<double> x{0.5, -0.2, 1.0};
  auto a = per_sample_gradient(m, SampleView{x, 1}).values;
  const auto n = numeric_gradient(m, SampleView{x, 1});
  EXPECT_LT(rel_diff(a, n), 1e-6);
  a[0] += 0.1;
  EXPECT_GT(rel_diff(a, n), 1e-3);
}

TEST(Accumulate, SumsPerSampleGradients) {
  const Dataset d = synthetic_dataset(12, 3, 3, 2.0, 4);
  const Model m = Model::initialized(ModelKind::kMlp, 3, 3, 5, 2);
  std::vector<SampleView> s;
  for (std::size_t i = 0; i < 4; ++i) s.push_back(d.sample(i));

  const auto one = accumulate(m, std::span(s).first(1), 1, 1);
  EXPECT_EQ(one.values, per_sample_gradient(m, s[0]).values);

  const auto three = accumulate(m, s, 1, 3);
  std::vector<double> want(m.param_count(), 0.0);
  for (int i = 0; i < 3; ++i) {
    const auto g = per_sample_gradient(m, s[i]);
    for (std::size_t j = 0; j < want.size(); ++j) want[j] += g.values[j];
  }
  EXPECT_EQ(three.sample_count, 3);
  EXPECT_LT(rel_diff(three.values, want), 1e-12);
  EXPECT_THROW(accumulate(m, s, 2, 3), InsufficientSamples);
}

TEST(Accumulate, SplitInvariance) {
  const Dataset d = synthetic_dataset(4, 3, 2, 2.0, 8);
  const Model m = Model::initialized(ModelKind::kSoftmax, 3, 2, 0, 3);
  std::vector<SampleView> s;
  for (std::size_t i = 0; i < 4; ++i) s.push_back(d.sample(i));
  auto split = [&](std::int64_t first) {
    auto a = accumulate(m, std::span(s).first(first), 1, first);
    const auto b = accumulate(m, std::span(s).subspan(first), 1, 4 - first);
    for (std::size_t j = 0; j < a.size(); ++j) a.values[j] += b.values[j];
    return a.values;
  };
  EXPECT_LT(rel_diff(split(2), split(3)), 1e-12);
}

TEST(Sgd, ByHand) {
  Model m(ModelKind::kLinearRegression, 1, 1);
  m.params()[0] = 1.0;
  m.params()[1] = -1.0;
  GradientBuffer g(2);
  g.values = {2.0, 4.0};
  g.sample_count = 2;
  const Model out = sgd_step(m, g, 0.1, 0.0);
  EXPECT_NEAR(out.params()[0], 0.9, 1e-15);
  EXPECT_NEAR(out.params()[1], -1.2, 1e-15);

  GradientBuffer zero(2);
  zero.sample_count = 5;
  const Model same = sgd_step(m, zero, 3.7, 0.0);
  EXPECT_EQ(same.params()[0], 1.0);
  EXPECT_EQ(same.params()[1], -1.0);

  GradientBuffer empty(2);
  EXPECT_THROW(sgd_step(m, empty, 0.1, 0.0), ZeroSampleCount);
}

TEST(Sgd, WeightDecayShrinks) {
  Model m(ModelKind::kLinearRegression, 1, 1);
  m.params()[0] = 2.0;
  GradientBuffer zero(2);
  zero.sample_count = 1;
  sgd_step_in_place(m, zero, 0.5, 0.1);
  EXPECT_NEAR(m.params()[0], 2.0 - 0.5 * 0.1 * 2.0, 1e-15);
}

TEST(Partition, Examples) {
  using R = std::vector<std::pair<std::size_t, std::size_t>>;
  EXPECT_EQ(partition(1000, Weights{7, 13}).ranges, (R{{0, 350}, {350, 1000}}));
  EXPECT_EQ(partition(100, Weights{10, 10}).ranges, (R{{0, 50}, {50, 100}}));
  EXPECT_EQ(partition(10, Weights{7, 13}).ranges, (R{{0, 3}, {3, 10}}));
  EXPECT_EQ(partition(10, Weights{7, 13}).aggregations(), 0u);
  EXPECT_THROW(partition(synthetic_dataset(10, 2, 2, 1.0, 1), Weights{7, 13}), DatasetTooSmall);
}

TEST(Partition, SlicesTileAndSlotsArePermutation) {
  for (const Weights& w : {Weights{7, 13}, Weights{10, 10}, Weights{1, 1, 18}, Weights{5, 3, 9, 3}}) {
    for (std::size_t D : {20u, 57u, 200u, 1003u}) {
      for (std::int64_t mb : {1, 2, 3}) {
        const auto p = partition(D, w, mb);
        std::size_t at = 0;
        std::set<std::size_t> seen;
        for (std::size_t i = 0; i < w.size(); ++i) {
          EXPECT_EQ(p.ranges[i].first, at);
          at = p.ranges[i].second;
          for (std::size_t s = 0; s < p.slice_size(i); ++s) seen.insert(p.sample_index(i, s));
        }
        EXPECT_EQ(at, D);
        EXPECT_EQ(seen.size(), D);
        EXPECT_EQ(*seen.rbegin(), D - 1);
      }
    }
  }
}

// The union drawn in aggregation k is the same block of C*mb global samples
// whatever the weights.
TEST(Partition, AggregationUnionIndependentOfWeights) {
  const std::size_t D = 1000;
  const std::int64_t mb = 2;
  for (const Weights& w : {Weights{10, 10}, Weights{13, 7}, Weights{1, 19}, Weights{4, 6, 10}}) {
    const auto p = partition(D, w, mb);
    ASSERT_EQ(p.aggregations(), 25u);
    for (std::size_t k = 0; k < p.aggregations(); ++k) {
      std::set<std::size_t> got;
      for (std::size_t i = 0; i < w.size(); ++i) {
        for (auto idx : p.aggregation_samples(i, k)) got.insert(idx);
      }
      ASSERT_EQ(got.size(), 40u);
      EXPECT_EQ(*got.begin(), k * 40);
      EXPECT_EQ(*got.rbegin(), k * 40 + 39);
    }
  }
}

// Summed buffers after any split equal a whole-batch gradient over the same
// samples.
TEST(Partition, SummedGradientMatchesWholeBatch) {
  const Dataset d = synthetic_dataset(400, 4, 3, 3.0, 2);
  const Model m = Model::initialized(ModelKind::kMlp, 4, 3, 6, 9);
  for (const Weights& w : {Weights{10, 10}, Weights{13, 7}, Weights{2, 8, 10}}) {
    const auto p = partition(d, w);
    for (std::size_t k = 0; k < p.aggregations(); k += 7) {
      std::vector<double> sum(m.param_count(), 0.0);
      for (std::size_t i = 0; i < w.size(); ++i) {
        GradientBuffer b(m.param_count());
        for (auto idx : p.aggregation_samples(i, k)) add_sample_gradient(m, d.sample(idx), b.values);
        for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += b.values[j];
      }
      std::vector<double> whole(m.param_count(), 0.0);
      for (std::size_t idx = k * 20; idx < (k + 1) * 20; ++idx) {
        const auto g = per_sample_gradient(m, d.sample(idx));
        for (std::size_t j = 0; j < whole.size(); ++j) whole[j] += g.values[j];
      }
      EXPECT_LT(rel_diff(sum, whole), 1e-9);
    }
  }
}

TEST(Dataset, SyntheticIsBalancedAndSeeded) {
  const Dataset a = synthetic_dataset(300, 4, 3, 4.0, 11);
  const Dataset b = synthetic_dataset(300, 4, 3, 4.0, 11);
  std::vector<int> counts(3, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++counts[static_cast<int>(a.sample(i).label)];
    EXPECT_EQ(a.sample(i).label, b.sample(i).label);
    EXPECT_EQ(a.sample(i).x[0], b.sample(i).x[0]);
  }
  EXPECT_EQ(counts, (std::vector<int>{100, 100, 100}));
}

TEST(Dataset, CsvLoad) {
  const auto path = std::filesystem::temp_directory_path() / "rb_trainer_test.csv";
  {
    std::ofstream out(path);
    out << "a,b,label\n1.5,2,0\n-1,0.25,1\n3,3,2\n";
  }
  const Dataset d = load_csv_dataset(path.string());
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.features(), 2);
  EXPECT_EQ(d.classes(), 3);
  EXPECT_EQ(d.sample(1).x[1], 0.25);
  EXPECT_EQ(d.sample(2).label, 2.0);
  std::filesystem::remove(path);
}

// Plain full-batch gradient descent on a tiny regression lowers the loss.
TEST(Training, LossDecreasesAllModels) {
  {
    const Dataset d = tiny_regression();
    Model m(ModelKind::kLinearRegression, 1, 1);
    double prev = 1e300;
    for (int e = 0; e < 20; ++e) {
      GradientBuffer g(m.param_count());
      double l = 0;
      for (std::size_t i = 0; i < d.size(); ++i) l += add_sample_gradient(m, d.sample(i), g.values);
      g.sample_count = 4;
      EXPECT_LT(l, prev);
      prev = l;
      sgd_step_in_place(m, g, 0.05, 0.0);
    }
  }
  const Dataset d = synthetic_dataset(200, 4, 2, 4.0, 3);
  for (ModelKind k : {ModelKind::kLinearRegression, ModelKind::kSoftmax, ModelKind::kMlp}) {
    Model m = Model::initialized(k, 4, model_outputs(k, d), 8, 1);
    auto epoch_loss = [&] {
      double l = 0;
      for (std::size_t i = 0; i < d.size(); ++i) l += loss(m, d.sample(i));
      return l / static_cast<double>(d.size());
    };
    const double before = epoch_loss();
    for (int e = 0; e < 5; ++e) {
      for (std::size_t b = 0; b < d.size(); b += 20) {
        GradientBuffer g(m.param_count());
        for (std::size_t i = b; i < b + 20; ++i) add_sample_gradient(m, d.sample(i), g.values);
        g.sample_count = 20;
        sgd_step_in_place(m, g, 1e-2, 0.0);
      }
    }
    EXPECT_LT(epoch_loss(), before) << to_string(k);
  }
}
