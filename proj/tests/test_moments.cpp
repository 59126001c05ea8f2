#include <cmath>
#include <random>

#include "doctest.h"
#include "stochopf/moments.hpp"

using namespace stochopf;

namespace {

// fix every variable in [0, n) to values from a seeded draw
Eigen::VectorXd random_x(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = dist(rng);
  return x;
}

}  // namespace

TEST_CASE("germ index is bus-major, time-minor and bijective") {
  GermIndex g({4, 7}, 3, {5});
  CHECK(g.dimension() == 7);
  CHECK(g.coord(4, 1) == 0);
  CHECK(g.coord(4, 3) == 2);
  CHECK(g.coord(7, 1) == 3);
  CHECK(g.ic_coord(5) == 6);
  for (int c = 0; c < g.dimension(); ++c) {
    const auto info = g.info(c);
    if (!info.is_ic) CHECK(g.coord(info.bus, info.k) == c);
  }
}

TEST_CASE("disturbance form reads factor rows") {
  GermIndex germ({4}, 2);
  Forecast f;
  f.horizon = 2;
  f.mean.resize(2);
  f.mean << -1.0, -2.0;
  f.factor.resize(2, 2);
  f.factor << 1.0, 0.0, 2.0, 3.0;
  const AffineForm a = disturbance_form(f, 4, 2, germ);
  CHECK(a.mean.constant == doctest::Approx(-2.0));
  CHECK(a.find_coeff(germ.coord(4, 1))->constant == doctest::Approx(2.0));
  CHECK(a.find_coeff(germ.coord(4, 2))->constant == doctest::Approx(3.0));

  Forecast det = artificial_forecast(1.0, 2);
  const AffineForm b = disturbance_form(det, 4, 2, germ);
  CHECK(b.coeffs.empty());
  CHECK(b.mean.constant == doctest::Approx(det.mean(1)));
}

TEST_CASE("disturbance variance matches the factor row sum of squares") {
  GermIndex germ({1}, 12);
  Forecast f;
  f.horizon = 12;
  f.mean = Eigen::VectorXd::Zero(12);
  Eigen::MatrixXd tilde(12, 12);
  tilde.setZero();
  // row 3 of the printed 12-step factor
  tilde(2, 0) = 292e-4;
  tilde(2, 1) = 60e-4;
  tilde(2, 2) = 7e-4;
  tilde(0, 0) = 87e-4;
  tilde(1, 0) = 176e-4;
  tilde(1, 1) = 20e-4;
  for (int i = 3; i < 12; ++i) tilde(i, i) = 1e-4;
  f.factor = tilde;
  const NumericForm n = evaluate(disturbance_form(f, 1, 3, germ), Eigen::VectorXd());
  const double want = (292.0 * 292 + 60.0 * 60 + 7.0 * 7) * 1e-8;
  CHECK(n.variance() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("generation form mean and variance") {
  GermIndex germ({9}, 2);
  PolicyVars pv({1}, {}, {9}, 2, Balancing::local);
  const auto& d = pv.devices()[0];

  Eigen::VectorXd x = Eigen::VectorXd::Zero(pv.num_vars());
  SUBCASE("zero policy is deterministic") {
    const NumericForm n = evaluate(generation_form(pv, d, 2, germ), x);
    CHECK(n.variance() == doctest::Approx(0.0));
  }
  SUBCASE("single response entry") {
    x(pv.mean_var(d, 1)) = 1.0;
    x(pv.matrix_var(d, 0, 1, 1)) = 0.5;
    const NumericForm n = evaluate(generation_form(pv, d, 1, germ), x);
    CHECK(n.mean == doctest::Approx(1.0));
    CHECK(n.variance() == doctest::Approx(0.25));
  }
}

TEST_CASE("variance adds across independent disturbances") {
  GermIndex germ({3, 8}, 2);
  PolicyVars pv({1}, {}, {3, 8}, 2, Balancing::local);
  const auto& d = pv.devices()[0];
  Eigen::VectorXd x = Eigen::VectorXd::Zero(pv.num_vars());
  x(pv.matrix_var(d, 0, 2, 1)) = 0.3;
  x(pv.matrix_var(d, 1, 2, 1)) = 0.4;
  const NumericForm n = evaluate(generation_form(pv, d, 2, germ), x);
  CHECK(n.variance() == doctest::Approx(0.09 + 0.16));
}

TEST_CASE("storage state telescopes the mean and accumulates columns") {
  GermIndex germ({2}, 2);
  PolicyVars pv({}, {5}, {2}, 2, Balancing::local);
  const auto& d = pv.devices()[0];
  Eigen::VectorXd x = Eigen::VectorXd::Zero(pv.num_vars());
  x(pv.mean_var(d, 1)) = 0.5;
  x(pv.mean_var(d, 2)) = 0.5;

  const NumericForm e3 = evaluate(storage_state_form(pv, d, 3, 1.0, 2.0, 0.0, germ), x);
  CHECK(e3.mean == doctest::Approx(1.0));
  CHECK(e3.variance() == doctest::Approx(0.0));

  x(pv.matrix_var(d, 0, 1, 1)) = 0.3;
  const NumericForm e3b = evaluate(storage_state_form(pv, d, 3, 1.0, 2.0, 0.0, germ), x);
  // coefficient on germ (2,1): -h * (S_11 + S_21) = -0.3
  CHECK(e3b.variance() == doctest::Approx(0.09));
}

TEST_CASE("initial-condition uncertainty has its own germ coordinate") {
  GermIndex germ({2}, 2, {5});
  PolicyVars pv({}, {5}, {2}, 2, Balancing::local);
  const auto& d = pv.devices()[0];
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(pv.num_vars());
  const NumericForm e1 = evaluate(storage_state_form(pv, d, 1, 1.0, 2.0, 0.04, germ), x);
  CHECK(e1.mean == doctest::Approx(2.0));
  CHECK(e1.variance() == doctest::Approx(0.04));
}

TEST_CASE("ramp form differences rows") {
  GermIndex germ({6}, 3);
  PolicyVars pv({2}, {}, {6}, 3, Balancing::local);
  const auto& d = pv.devices()[0];
  Eigen::VectorXd x = Eigen::VectorXd::Zero(pv.num_vars());

  SUBCASE("constant schedule, zero response") {
    x(pv.mean_var(d, 1)) = 1.5;
    x(pv.mean_var(d, 2)) = 1.5;
    const NumericForm n = evaluate(ramp_form(pv, d, 2, germ), x);
    CHECK(n.mean == doctest::Approx(0.0));
    CHECK(n.variance() == doctest::Approx(0.0));
  }
  SUBCASE("diagonal-only term") {
    x(pv.matrix_var(d, 0, 2, 2)) = 0.4;
    const NumericForm n = evaluate(ramp_form(pv, d, 2, germ), x);
    CHECK(n.variance() == doctest::Approx(0.16));
  }
  SUBCASE("difference of rows") {
    x(pv.matrix_var(d, 0, 2, 1)) = 0.3;
    x(pv.matrix_var(d, 0, 1, 1)) = 0.1;
    x(pv.matrix_var(d, 0, 2, 2)) = 0.4;
    const NumericForm n = evaluate(ramp_form(pv, d, 2, germ), x);
    CHECK(n.variance() == doctest::Approx(0.2 * 0.2 + 0.16));
  }
}

TEST_CASE("line flow form combines nodal forms") {
  GermIndex germ({1}, 1);
  Eigen::MatrixXd phi(1, 2);
  phi << 0.5, -0.5;

  std::vector<AffineForm> nodal(2);
  nodal[0].mean = LinExpr(1.0);
  nodal[1].mean = LinExpr(-1.0);
  AffineForm flow = line_flow_form(phi, 0, nodal);
  CHECK(flow.mean.constant == doctest::Approx(1.0));

  std::vector<AffineForm> zero(2);
  flow = line_flow_form(phi, 0, zero);
  CHECK(flow.mean.is_zero());
  CHECK(flow.coeffs.empty());

  // single uncertain bus with factor entry l and no recourse
  const double l = 0.8;
  std::vector<AffineForm> uncertain(2);
  uncertain[0].add_coeff(germ.coord(1, 1), LinExpr(l));
  Eigen::MatrixXd phi2(1, 2);
  phi2 << 0.7, 0.1;
  const NumericForm n = evaluate(line_flow_form(phi2, 0, uncertain), Eigen::VectorXd());
  CHECK(n.variance() == doctest::Approx(0.49 * l * l));
}

TEST_CASE("decision variable counts match the closed forms") {
  CHECK(PolicyVars::count_decision_vars(Balancing::local, 2, 1, 1, 24) == 972);
  CHECK(PolicyVars::count_decision_vars(Balancing::global, 2, 1, 1, 24) == 972);
  CHECK(PolicyVars::count_decision_vars(Balancing::local, 10, 5, 7, 12) == 8370);

  // property: layouts actually create that many scalars
  for (int nu : {1, 2, 5, 7, 10}) {
    for (int ns : {0, 1, 5}) {
      for (int nd : {1, 2, 7}) {
        for (int T : {4, 12, 24}) {
          std::vector<int> gens, stos, dists;
          for (int i = 0; i < nu; ++i) gens.push_back(100 + i);
          for (int i = 0; i < ns; ++i) stos.push_back(200 + i);
          for (int i = 0; i < nd; ++i) dists.push_back(300 + i);
          for (Balancing mode : {Balancing::local, Balancing::global}) {
            PolicyVars pv(gens, stos, dists, T, mode);
            CHECK(pv.num_vars() ==
                  PolicyVars::count_decision_vars(mode, nu, ns, nd, T));
          }
        }
      }
    }
  }
}

TEST_CASE("global balancing shares one response matrix") {
  GermIndex germ({3, 8}, 2);
  PolicyVars pv({1}, {}, {3, 8}, 2, Balancing::global);
  const auto& d = pv.devices()[0];
  CHECK(pv.matrix_var(d, 0, 2, 1) == pv.matrix_var(d, 1, 2, 1));

  Eigen::VectorXd x = Eigen::VectorXd::Zero(pv.num_vars());
  x(pv.matrix_var(d, 0, 2, 1)) = 0.3;
  const NumericForm n = evaluate(generation_form(pv, d, 2, germ), x);
  // both germ coordinates carry the shared entry
  CHECK(n.variance() == doctest::Approx(2 * 0.09));
}

TEST_CASE("linearity of the affine algebra is exact") {
  GermIndex germ({1, 2}, 3);
  PolicyVars pv({7}, {9}, {1, 2}, 3, Balancing::local);
  const auto& g = pv.devices()[0];
  const auto& s = pv.devices()[1];
  const Eigen::VectorXd x = random_x(pv.num_vars(), 3);

  const AffineForm a = generation_form(pv, g, 3, germ);
  const AffineForm b = storage_injection_form(pv, s, 3, germ);
  const AffineForm sum = a + b;

  const NumericForm na = evaluate(a, x);
  const NumericForm nb = evaluate(b, x);
  const NumericForm ns = evaluate(sum, x);
  CHECK(ns.mean == doctest::Approx(na.mean + nb.mean).epsilon(1e-15));
  for (const auto& [coord, c] : ns.coeffs) {
    double want = 0.0;
    for (const auto& [ca, va] : na.coeffs) {
      if (ca == coord) want += va;
    }
    for (const auto& [cb, vb] : nb.coeffs) {
      if (cb == coord) want += vb;
    }
    CHECK(c == doctest::Approx(want).epsilon(1e-15));
  }
}

TEST_CASE("causality: no coefficients beyond the current time") {
  GermIndex germ({1}, 4);
  PolicyVars pv({7}, {}, {1}, 4, Balancing::local);
  const auto& d = pv.devices()[0];
  for (int t = 1; t <= 4; ++t) {
    const AffineForm a = generation_form(pv, d, t, germ);
    for (const auto& [coord, e] : a.coeffs) {
      CHECK(germ.info(coord).k <= t);
    }
  }
}
