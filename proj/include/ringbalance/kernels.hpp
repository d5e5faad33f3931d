#pragma once

// Dense f64 inner loops used by gradient accumulation, the allreduce
// reduction, and the SGD update. A scalar reference implementation is always
// built; vector variants are compiled per ISA and picked at runtime.
//
// Element-wise kernels (add, axpy, sgd_update) are bit-identical across
// variants. dot() reassociates the sum in vector variants and matches the
// reference only to rounding.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace ringbalance::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view name(Isa isa);

struct KernelTable {
  Isa isa;
  // dst[i] += src[i]
  void (*add)(double* dst, const double* src, std::size_t n);
  // dst[i] += alpha * x[i]
  void (*axpy)(double* dst, double alpha, const double* x, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // p[i] -= lr * (g[i] / count + decay * p[i])
  void (*sgd_update)(double* p, const double* g, double lr, double count, double decay, std::size_t n);
};

const KernelTable& scalar_table();

// Variants compiled into this binary and supported by the running CPU,
// scalar first.
std::vector<Isa> available();

// The table in use. Chosen once from CPU features; RINGBALANCE_KERNELS=scalar
// forces the reference path.
const KernelTable& active();
const KernelTable& table(Isa isa);

// Overrides the active table (tests and benchmarking). Throws if the ISA is
// not available.
void select(Isa isa);

inline void add(std::span<double> dst, std::span<const double> src) {
  active().add(dst.data(), src.data(), dst.size());
}
inline void axpy(std::span<double> dst, double alpha, std::span<const double> x) {
  active().axpy(dst.data(), alpha, x.data(), dst.size());
}
inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}
inline void sgd_update(std::span<double> p, std::span<const double> g, double lr, double count, double decay) {
  active().sgd_update(p.data(), g.data(), lr, count, decay, p.size());
}

namespace detail {
const KernelTable* avx2_table();
const KernelTable* neon_table();
}  // namespace detail

}  // namespace ringbalance::kernels
