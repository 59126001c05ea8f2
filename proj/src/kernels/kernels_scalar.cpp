#include "stochopf/kernels.hpp"

#include <cmath>

namespace stochopf::kernels {
namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = std::fma(a, x[i], y[i]);
  }
}

// 4-way interleaved accumulation; lane j sums indices i with i % 4 == j.
// This is the pinned reduction order the AVX2 variant reproduces exactly.
double sum4(const double* x, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc[0] += x[i];
    acc[1] += x[i + 1];
    acc[2] += x[i + 2];
    acc[3] += x[i + 3];
  }
  for (std::size_t j = 0; i < n; ++i, ++j) {
    acc[j] += x[i];
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double sumsq_dev4(const double* x, std::size_t n, double mean) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int j = 0; j < 4; ++j) {
      const double d = x[i + j] - mean;
      acc[j] = std::fma(d, d, acc[j]);
    }
  }
  for (std::size_t j = 0; i < n; ++i, ++j) {
    const double d = x[i] - mean;
    acc[j] = std::fma(d, d, acc[j]);
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void mean_var_scalar(const double* x, std::size_t n, double* mean, double* var) {
  if (n == 0) {
    *mean = 0.0;
    *var = 0.0;
    return;
  }
  *mean = sum4(x, n) / static_cast<double>(n);
  *var = n < 2 ? 0.0 : sumsq_dev4(x, n, *mean) / static_cast<double>(n - 1);
}

std::size_t count_above_scalar(const double* x, std::size_t n, double bound) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    c += x[i] > bound;
  }
  return c;
}

std::size_t count_below_scalar(const double* x, std::size_t n, double bound) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    c += x[i] < bound;
  }
  return c;
}

}  // namespace

const Backend& scalar_backend() {
  static const Backend backend{
      "scalar", axpy_scalar, mean_var_scalar, count_above_scalar, count_below_scalar};
  return backend;
}

}  // namespace stochopf::kernels
