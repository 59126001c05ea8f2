#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "stochopf/kernels.hpp"

using namespace stochopf;

namespace {
std::vector<double> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> dist(0.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}
}  // namespace

TEST_CASE("scalar kernels against naive loops") {
  const auto x = random_vec(1001, 7);
  auto y = random_vec(1001, 8);
  auto y_ref = y;
  kernels::scalar_backend().axpy(0.37, x.data(), y.data(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y_ref[i] += 0.37 * x[i];
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(y[i] == doctest::Approx(y_ref[i]).epsilon(1e-14));
  }

  double mean = 0.0, var = 0.0;
  kernels::scalar_backend().mean_var(x.data(), x.size(), &mean, &var);
  double m_ref = 0.0;
  for (double v : x) m_ref += v;
  m_ref /= static_cast<double>(x.size());
  double v_ref = 0.0;
  for (double v : x) v_ref += (v - m_ref) * (v - m_ref);
  v_ref /= static_cast<double>(x.size() - 1);
  CHECK(mean == doctest::Approx(m_ref).epsilon(1e-12));
  CHECK(var == doctest::Approx(v_ref).epsilon(1e-12));

  CHECK(kernels::scalar_backend().count_above(x.data(), x.size(), 0.5) ==
        [&] {
          std::size_t c = 0;
          for (double v : x) c += v > 0.5;
          return c;
        }());
}

TEST_CASE("avx2 backend matches scalar bit for bit") {
  const kernels::Backend* avx2 = kernels::avx2_backend();
  if (avx2 == nullptr) return;  // cpu without avx2

  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 127u, 1024u, 10007u}) {
    const auto x = random_vec(n, 11 + static_cast<unsigned>(n));
    auto y1 = random_vec(n, 13);
    auto y2 = y1;
    kernels::scalar_backend().axpy(-1.7, x.data(), y1.data(), n);
    avx2->axpy(-1.7, x.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == y2[i]);

    double m1 = 0, v1 = 0, m2 = 0, v2 = 0;
    kernels::scalar_backend().mean_var(x.data(), n, &m1, &v1);
    avx2->mean_var(x.data(), n, &m2, &v2);
    CHECK(m1 == m2);
    CHECK(v1 == v2);

    CHECK(kernels::scalar_backend().count_above(x.data(), n, 0.25) ==
          avx2->count_above(x.data(), n, 0.25));
    CHECK(kernels::scalar_backend().count_below(x.data(), n, -0.25) ==
          avx2->count_below(x.data(), n, -0.25));
  }
}

TEST_CASE("edge cases") {
  double mean = 1.0, var = 1.0;
  kernels::mean_var(nullptr, 0, &mean, &var);
  CHECK(mean == 0.0);
  CHECK(var == 0.0);
  const double one = 42.0;
  kernels::mean_var(&one, 1, &mean, &var);
  CHECK(mean == 42.0);
  CHECK(var == 0.0);
}
