#include "ringbalance/kernels.hpp"

namespace ringbalance::kernels {
namespace {

void add_scalar(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

void axpy_scalar(double* dst, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += alpha * x[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void sgd_update_scalar(double* p, const double* g, double lr, double count, double decay, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) p[i] -= lr * (g[i] / count + decay * p[i]);
}

constexpr KernelTable kScalar{Isa::kScalar, add_scalar, axpy_scalar, dot_scalar, sgd_update_scalar};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace ringbalance::kernels
