#include <cmath>

#include "doctest.h"
#include "stochopf/runner.hpp"
#include "stochopf/validate.hpp"

using namespace stochopf;

namespace {
const std::string kDataDir = STOCHOPF_DATA_DIR;
}

TEST_CASE("counter-based draws replay exactly") {
  const SampleBatch a = sample_germ(16, 42, 3);
  const SampleBatch b = sample_germ(16, 42, 3);
  CHECK(a.data == b.data);
  // a different seed decorrelates
  const SampleBatch c = sample_germ(16, 43, 3);
  CHECK(a.data != c.data);
  // single draw is a fixed function of (seed, index)
  CHECK(a.at(0, 0) == counter_normal(42, 0));
  CHECK(a.at(2, 5) == counter_normal(42, 5 * 3 + 2));
}

TEST_CASE("germ moments at n = 1e5") {
  const int n = 100000;
  const SampleBatch b = sample_germ(n, 7, 4);
  for (int c = 0; c < 4; ++c) {
    double mean = 0.0, var = 0.0;
    for (int s = 0; s < n; ++s) mean += b.at(c, s);
    mean /= n;
    for (int s = 0; s < n; ++s) var += (b.at(c, s) - mean) * (b.at(c, s) - mean);
    var /= n - 1;
    CHECK(std::fabs(mean) <= 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(var > 0.97);
    CHECK(var < 1.03);
  }
}

TEST_CASE("empty batch") {
  const SampleBatch b = sample_germ(0, 1, 0);
  CHECK(b.data.empty());
}

TEST_CASE("realization of a fixed form") {
  NumericForm f;
  f.mean = 2.0;
  f.coeffs = {{0, 0.5}};
  const SampleBatch b = sample_germ(1000, 3, 1);
  std::vector<double> out(1000);
  realize_into(f, b, out.data());
  // zero-coefficient check: deterministic forms realize to the mean
  NumericForm det;
  det.mean = -1.5;
  std::vector<double> outd(1000);
  realize_into(det, b, outd.data());
  for (double v : outd) CHECK(v == -1.5);
  // variance of the uncertain one is coeff^2
  double mean = 0, var = 0;
  for (double v : out) mean += v;
  mean /= 1000;
  for (double v : out) var += (v - mean) * (v - mean);
  var /= 999;
  CHECK(var == doctest::Approx(0.25).epsilon(0.2));
}

TEST_CASE("binding one-sided bound violates at rate epsilon") {
  // mu + lambda * sigma == bound exactly: empirical rate ~ epsilon
  const double eps = 0.05;
  const double lam = lambda_of_epsilon(eps);
  NumericForm f;
  f.mean = 1.0;
  f.coeffs = {{0, 0.7}};
  const double bound = f.mean + lam * 0.7;
  const int n = 100000;
  const SampleBatch b = sample_germ(n, 11, 1);
  std::vector<double> out(n);
  realize_into(f, b, out.data());
  std::size_t viol = 0;
  for (double v : out) viol += v > bound;
  const double rate = static_cast<double>(viol) / n;
  CHECK(std::fabs(rate - eps) <= 4.0 * std::sqrt(eps * (1 - eps) / n));
}

TEST_CASE("full validation at the case5 optimum") {
  RunManifest m;
  m.case_path = kDataDir + "/case5.json";
  m.horizon = 24;
  m.factor_path = kDataDir + "/factor_t24.json";
  m.samples = 4000;
  m.seed = 5;
  const ScenarioResult r = run_scenario(m);
  REQUIRE(r.solution.status == SolveStatus::optimal);
  REQUIRE(r.report.has_value());
  const ValidationReport& rep = *r.report;

  CHECK(rep.max_balance_residual < 1e-9);
  CHECK(rep.max_storage_path_mismatch < 1e-10);
  CHECK(rep.max_telescoping_residual < 1e-10);
  CHECK(rep.all_pass());

  // one-sided risk cap with binomial slack
  const double cap = 0.05 + 4.0 * std::sqrt(0.05 * 0.95 / m.samples);
  CHECK(rep.worst_violation_rate() <= cap);
}

TEST_CASE("validation report serializes") {
  ValidationReport rep;
  rep.samples = 10;
  rep.seed = 2;
  rep.epsilon = 0.05;
  const std::string js = rep.to_json();
  CHECK(js.find("max_balance_residual") != std::string::npos);
}
