// Built with -mavx2 only; callers must check CPU support before use.
#include "ringbalance/kernels.hpp"

#include <immintrin.h>

namespace ringbalance::kernels {
namespace {

constexpr std::size_t kLanes = 4;

void add_avx2(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    __m256d a = _mm256_loadu_pd(dst + i);
    __m256d b = _mm256_loadu_pd(src + i);
    _mm256_storeu_pd(dst + i, _mm256_add_pd(a, b));
  }
  for (; i < n; ++i) dst[i] += src[i];
}

void axpy_avx2(double* dst, double alpha, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    __m256d d = _mm256_loadu_pd(dst + i);
    __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(dst + i, _mm256_add_pd(d, prod));
  }
  for (; i < n; ++i) dst[i] += alpha * x[i];
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  // Two independent accumulators hide add latency.
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(x + i + kLanes), _mm256_loadu_pd(y + i + kLanes)));
  }
  for (; i + kLanes <= n; i += kLanes) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  __m256d acc = _mm256_add_pd(acc0, acc1);
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  __m128d pair = _mm_add_pd(lo, hi);
  double sum = _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void sgd_update_avx2(double* p, const double* g, double lr, double count, double decay, std::size_t n) {
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d vcount = _mm256_set1_pd(count);
  const __m256d vdecay = _mm256_set1_pd(decay);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    __m256d vp = _mm256_loadu_pd(p + i);
    __m256d step = _mm256_add_pd(_mm256_div_pd(_mm256_loadu_pd(g + i), vcount), _mm256_mul_pd(vdecay, vp));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(vp, _mm256_mul_pd(vlr, step)));
  }
  for (; i < n; ++i) p[i] -= lr * (g[i] / count + decay * p[i]);
}

constexpr KernelTable kAvx2{Isa::kAvx2, add_avx2, axpy_avx2, dot_avx2, sgd_update_avx2};

}  // namespace

namespace detail {
const KernelTable* avx2_table() { return &kAvx2; }
}  // namespace detail

}  // namespace ringbalance::kernels
