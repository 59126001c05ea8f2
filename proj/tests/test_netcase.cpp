#include <random>

#include "doctest.h"
#include "stochopf/netcase.hpp"

using namespace stochopf;

namespace {

const char* kTriangle = R"({
  "name": "triangle",
  "buses": [1, 2, 3],
  "lines": [
    {"id": 1, "from": 1, "to": 2, "x": 1.0, "p_line_max": 10.0},
    {"id": 2, "from": 1, "to": 3, "x": 1.0, "p_line_max": 10.0},
    {"id": 3, "from": 3, "to": 2, "x": 1.0, "p_line_max": 10.0}
  ],
  "generators": [{"bus": 1, "u_min": 0, "u_max": 5, "du_min": -1, "du_max": 1,
                  "gamma2": 0.01, "gamma1": 0.3, "gamma0": 0.2}],
  "loads": [{"bus": 2, "d_nom": 1.0}]
})";

GridCase two_bus() {
  return parse_case(R"({
    "buses": [1, 2],
    "lines": [{"id": 1, "from": 1, "to": 2, "x": 0.5, "p_line_max": 10.0}],
    "generators": [{"bus": 1, "u_min": 0, "u_max": 5, "du_min": -1, "du_max": 1,
                    "gamma2": 0.01, "gamma1": 0.3, "gamma0": 0.2}],
    "loads": [{"bus": 2, "d_nom": 1.0}]
  })");
}

}  // namespace

TEST_CASE("case5 fixture parses with the documented device sets") {
  const GridCase c = parse_case_file(std::string(STOCHOPF_DATA_DIR) + "/case5.json");
  CHECK(c.num_buses() == 5);
  CHECK(c.lines.size() == 6);
  CHECK(c.generators.size() == 2);
  CHECK(c.generators[0].bus == 1);
  CHECK(c.generators[1].bus == 4);
  CHECK(c.storages.size() == 1);
  CHECK(c.storages[0].bus == 5);
  CHECK(c.disturbances.size() == 1);
  CHECK(c.disturbances[0].bus == 4);
}

TEST_CASE("minimal two-bus case is valid") {
  const GridCase c = two_bus();
  CHECK(c.num_buses() == 2);
  CHECK(c.generators.size() == 1);
}

TEST_CASE("generator and storage on one bus is rejected") {
  CHECK_THROWS_AS(parse_case(R"({
    "buses": [1, 2, 3],
    "lines": [{"id": 1, "from": 1, "to": 2, "x": 1, "p_line_max": 1},
              {"id": 2, "from": 2, "to": 3, "x": 1, "p_line_max": 1}],
    "generators": [{"bus": 3, "u_min": 0, "u_max": 1, "du_min": -1, "du_max": 1,
                    "gamma2": 1, "gamma1": 0, "gamma0": 0}],
    "storages": [{"bus": 3, "e_min": 0, "e_max": 6, "s_min": -10, "s_max": 10,
                  "e_ic_mean": 2, "e_ic_var": 0, "e_term_min": 0.19, "e_term_max": 0.21}]
  })"),
                  ValidationError);
}

TEST_CASE("schema violations name the missing field") {
  try {
    parse_case(R"({"buses": [1], "lines": [{"id": 1, "from": 1, "to": 1}]})");
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }
}

TEST_CASE("disconnected graph is rejected") {
  CHECK_THROWS_AS(parse_case(R"({
    "buses": [1, 2, 3, 4],
    "lines": [{"id": 1, "from": 1, "to": 2, "x": 1, "p_line_max": 1},
              {"id": 2, "from": 3, "to": 4, "x": 1, "p_line_max": 1}]
  })"),
                  ValidationError);
}

TEST_CASE("per-unit line flow defaults follow the 85 percent rule") {
  const GridCase c = two_bus();
  CHECK(c.lines[0].c_max == doctest::Approx(8.5));
  CHECK(c.lines[0].c_min == doctest::Approx(-8.5));
}

TEST_CASE("ptdf on the unit triangle") {
  const GridCase c = parse_case(kTriangle);
  const Ptdf ptdf = compute_ptdf(c, 1);
  Eigen::VectorXd p(3);
  p << 1.0, -1.0, 0.0;
  const Eigen::VectorXd f = ptdf.flows(p);
  CHECK(f(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));  // line 1-2
  CHECK(f(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));  // line 1-3
  CHECK(f(2) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));  // line 3-2
}

TEST_CASE("zero injection gives zero flows") {
  const GridCase c = parse_case(kTriangle);
  const Ptdf ptdf = compute_ptdf(c, 2);
  CHECK(ptdf.flows(Eigen::VectorXd::Zero(3)).norm() == doctest::Approx(0.0));
}

TEST_CASE("single line carries the full transfer") {
  const GridCase c = two_bus();
  const Ptdf ptdf = compute_ptdf(c, 1);
  Eigen::VectorXd p(2);
  p << 1.0, -1.0;
  CHECK(ptdf.flows(p)(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("reference-bus invariance and flow conservation on balanced vectors") {
  const GridCase c = parse_case_file(std::string(STOCHOPF_DATA_DIR) + "/case5.json");
  const int n = c.num_buses();
  const Ptdf a = compute_ptdf(c, c.buses.front());
  const Ptdf b = compute_ptdf(c, c.buses.back());

  std::mt19937 rng(42);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd p(n);
    for (int i = 0; i < n; ++i) p(i) = dist(rng);
    p.array() -= p.mean();  // balanced

    const Eigen::VectorXd fa = a.flows(p);
    const Eigen::VectorXd fb = b.flows(p);
    CHECK((fa - fb).lpNorm<Eigen::Infinity>() < 1e-9);

    // signed incident flows reproduce the injection at every bus
    Eigen::VectorXd recovered = Eigen::VectorXd::Zero(n);
    for (std::size_t li = 0; li < c.lines.size(); ++li) {
      recovered(c.bus_index(c.lines[li].from)) += fa(static_cast<int>(li));
      recovered(c.bus_index(c.lines[li].to)) -= fa(static_cast<int>(li));
    }
    CHECK((recovered - p).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}
