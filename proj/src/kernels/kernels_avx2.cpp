#include "stochopf/kernels.hpp"

#include <cmath>
#include <immintrin.h>

namespace stochopf::kernels {
namespace {

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, vx, vy));
  }
  for (; i < n; ++i) {
    y[i] = std::fma(a, x[i], y[i]);
  }
}

// Matches the scalar 4-lane interleaved order bit for bit.
double sum4_avx2(const double* x, std::size_t n) {
  __m256d vacc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vacc = _mm256_add_pd(vacc, _mm256_loadu_pd(x + i));
  }
  alignas(32) double acc[4];
  _mm256_store_pd(acc, vacc);
  for (std::size_t j = 0; i < n; ++i, ++j) {
    acc[j] += x[i];
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double sumsq_dev4_avx2(const double* x, std::size_t n, double mean) {
  const __m256d vmean = _mm256_set1_pd(mean);
  __m256d vacc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vmean);
    vacc = _mm256_fmadd_pd(d, d, vacc);
  }
  alignas(32) double acc[4];
  _mm256_store_pd(acc, vacc);
  for (std::size_t j = 0; i < n; ++i, ++j) {
    const double d = x[i] - mean;
    acc[j] = std::fma(d, d, acc[j]);
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void mean_var_avx2(const double* x, std::size_t n, double* mean, double* var) {
  if (n == 0) {
    *mean = 0.0;
    *var = 0.0;
    return;
  }
  *mean = sum4_avx2(x, n) / static_cast<double>(n);
  *var = n < 2 ? 0.0 : sumsq_dev4_avx2(x, n, *mean) / static_cast<double>(n - 1);
}

std::size_t count_above_avx2(const double* x, std::size_t n, double bound) {
  const __m256d vb = _mm256_set1_pd(bound);
  std::size_t c = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d cmp = _mm256_cmp_pd(_mm256_loadu_pd(x + i), vb, _CMP_GT_OQ);
    c += static_cast<std::size_t>(_mm_popcnt_u32(
        static_cast<unsigned>(_mm256_movemask_pd(cmp))));
  }
  for (; i < n; ++i) {
    c += x[i] > bound;
  }
  return c;
}

std::size_t count_below_avx2(const double* x, std::size_t n, double bound) {
  const __m256d vb = _mm256_set1_pd(bound);
  std::size_t c = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d cmp = _mm256_cmp_pd(_mm256_loadu_pd(x + i), vb, _CMP_LT_OQ);
    c += static_cast<std::size_t>(_mm_popcnt_u32(
        static_cast<unsigned>(_mm256_movemask_pd(cmp))));
  }
  for (; i < n; ++i) {
    c += x[i] < bound;
  }
  return c;
}

}  // namespace

const Backend* avx2_backend_impl() {
  static const Backend backend{
      "avx2", axpy_avx2, mean_var_avx2, count_above_avx2, count_below_avx2};
  return &backend;
}

}  // namespace stochopf::kernels
