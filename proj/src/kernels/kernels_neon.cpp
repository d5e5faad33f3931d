// AArch64 always has Advanced SIMD, so no runtime probe is needed here.
#include "ringbalance/kernels.hpp"

#include <arm_neon.h>

namespace ringbalance::kernels {
namespace {

constexpr std::size_t kLanes = 2;

void add_neon(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    vst1q_f64(dst + i, vaddq_f64(vld1q_f64(dst + i), vld1q_f64(src + i)));
  }
  for (; i < n; ++i) dst[i] += src[i];
}

void axpy_neon(double* dst, double alpha, const double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    // vmulq + vaddq rather than vfmaq to stay bit-identical with the reference.
    vst1q_f64(dst + i, vaddq_f64(vld1q_f64(dst + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) dst[i] += alpha * x[i];
}

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = vaddq_f64(acc0, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    acc1 = vaddq_f64(acc1, vmulq_f64(vld1q_f64(x + i + kLanes), vld1q_f64(y + i + kLanes)));
  }
  for (; i + kLanes <= n; i += kLanes) {
    acc0 = vaddq_f64(acc0, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  }
  double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void sgd_update_neon(double* p, const double* g, double lr, double count, double decay, std::size_t n) {
  const float64x2_t vlr = vdupq_n_f64(lr);
  const float64x2_t vcount = vdupq_n_f64(count);
  const float64x2_t vdecay = vdupq_n_f64(decay);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    float64x2_t vp = vld1q_f64(p + i);
    float64x2_t step = vaddq_f64(vdivq_f64(vld1q_f64(g + i), vcount), vmulq_f64(vdecay, vp));
    vst1q_f64(p + i, vsubq_f64(vp, vmulq_f64(vlr, step)));
  }
  for (; i < n; ++i) p[i] -= lr * (g[i] / count + decay * p[i]);
}

constexpr KernelTable kNeon{Isa::kNeon, add_neon, axpy_neon, dot_neon, sgd_update_neon};

}  // namespace

namespace detail {
const KernelTable* neon_table() { return &kNeon; }
}  // namespace detail

}  // namespace ringbalance::kernels
