#pragma once

#include <cstddef>

namespace stochopf::kernels {

/*
 * Hot inner loops of the Monte Carlo machinery: realization of affine
 * forms across samples (axpy over the sample axis), moment reductions,
 * and violation counting.
 *
 * Every kernel exists as a scalar reference and, on x86-64, an AVX2
 * variant selected at runtime. The two are bit-identical by contract:
 * axpy is an elementwise fma (lanes are independent samples), and the
 * reductions pin a 4-way interleaved accumulation order that matches
 * the vector lanes. Equivalence is enforced by tests.
 */
struct Backend {
  const char* name;
  // y[i] = fma(a, x[i], y[i])
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // mean = sum(x)/n, var = sum((x-mean)^2)/(n-1); var = 0 when n < 2
  void (*mean_var)(const double* x, std::size_t n, double* mean, double* var);
  std::size_t (*count_above)(const double* x, std::size_t n, double bound);
  std::size_t (*count_below)(const double* x, std::size_t n, double bound);
};

const Backend& scalar_backend();
// nullptr when the binary or the cpu lacks AVX2
const Backend* avx2_backend();

// Runtime-selected backend (AVX2 when available, scalar otherwise).
const Backend& active();
// Override the active backend; used by tests and benchmarks.
void use(const Backend& backend);

inline void axpy(double a, const double* x, double* y, std::size_t n) {
  active().axpy(a, x, y, n);
}
inline void mean_var(const double* x, std::size_t n, double* mean, double* var) {
  active().mean_var(x, n, mean, var);
}
inline std::size_t count_above(const double* x, std::size_t n, double bound) {
  return active().count_above(x, n, bound);
}
inline std::size_t count_below(const double* x, std::size_t n, double bound) {
  return active().count_below(x, n, bound);
}

}  // namespace stochopf::kernels
