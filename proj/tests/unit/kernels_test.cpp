#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "ringbalance/kernels.hpp"

using namespace ringbalance;
namespace k = ringbalance::kernels;

namespace {

std::vector<double> randoms(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 3.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // namespace

TEST(Kernels, ScalarAlwaysAvailable) {
  const auto isas = k::available();
  ASSERT_FALSE(isas.empty());
  EXPECT_EQ(isas.front(), k::Isa::kScalar);
  EXPECT_EQ(k::scalar_table().isa, k::Isa::kScalar);
}

TEST(Kernels, ScalarReference) {
  std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  k::scalar_table().add(a.data(), b.data(), 3);
  EXPECT_EQ(a, (std::vector<double>{5, 7, 9}));
  k::scalar_table().axpy(a.data(), -1.0, b.data(), 3);
  EXPECT_EQ(a, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(k::scalar_table().dot(a.data(), b.data(), 3), 32.0);
  std::vector<double> p{1.0, -1.0}, g{2.0, 4.0};
  k::scalar_table().sgd_update(p.data(), g.data(), 0.1, 2.0, 0.0, 2);
  EXPECT_DOUBLE_EQ(p[0], 0.9);
  EXPECT_DOUBLE_EQ(p[1], -1.2);
}

// Every compiled variant against the scalar reference, across lengths that
// hit the vector body, the tail and both together.
TEST(Kernels, VariantsMatchScalar) {
  std::mt19937_64 rng(11);
  const auto& ref = k::scalar_table();
  for (k::Isa isa : k::available()) {
    const auto& t = k::table(isa);
    SCOPED_TRACE(std::string(k::name(isa)));
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 67u, 1000u, 1027u}) {
      const auto x = randoms(n, rng);
      const auto y = randoms(n, rng);

      auto a1 = y, a2 = y;
      ref.add(a1.data(), x.data(), n);
      t.add(a2.data(), x.data(), n);
      EXPECT_TRUE(bit_equal(a1, a2)) << "add n=" << n;

      auto b1 = y, b2 = y;
      ref.axpy(b1.data(), -0.37, x.data(), n);
      t.axpy(b2.data(), -0.37, x.data(), n);
      EXPECT_TRUE(bit_equal(b1, b2)) << "axpy n=" << n;

      auto p1 = y, p2 = y;
      ref.sgd_update(p1.data(), x.data(), 0.05, 7.0, 1e-4, n);
      t.sgd_update(p2.data(), x.data(), 0.05, 7.0, 1e-4, n);
      EXPECT_TRUE(bit_equal(p1, p2)) << "sgd n=" << n;

      const double d1 = ref.dot(x.data(), y.data(), n);
      const double d2 = t.dot(x.data(), y.data(), n);
      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::abs(x[i] * y[i]);
      EXPECT_LE(std::abs(d1 - d2), 1e-14 * std::max(mag, 1.0)) << "dot n=" << n;
    }
  }
}

TEST(Kernels, SelectSwitchesActiveTable) {
  const k::Isa before = k::active().isa;
  k::select(k::Isa::kScalar);
  EXPECT_EQ(k::active().isa, k::Isa::kScalar);
  std::vector<double> a{1, 1}, b{2, 3};
  k::add(a, b);
  EXPECT_EQ(a, (std::vector<double>{3, 4}));
  k::select(before);
  EXPECT_EQ(k::active().isa, before);
}
