#include <cmath>

#include "doctest.h"
#include "stochopf/runner.hpp"
#include "stochopf/solve.hpp"

using namespace stochopf;

namespace {

const std::string kDataDir = STOCHOPF_DATA_DIR;

// two-bus case: one generator, one deterministic or uncertain load
GridCase tiny_case(bool uncertain) {
  std::string dist = uncertain ? R"("disturbances": [{"bus": 2, "forecast": "artificial"}],)"
                               : R"("disturbances": [],)";
  return parse_case(R"({
    "buses": [1, 2],
    "lines": [{"id": 1, "from": 1, "to": 2, "x": 0.5, "p_line_max": 50.0}],
    "generators": [{"bus": 1, "u_min": 0, "u_max": 5, "du_min": -2, "du_max": 2,
                    "gamma2": 0.01, "gamma1": 0.3, "gamma0": 0.2}],)" +
                    dist + R"(
    "loads": [{"bus": 2, "d_nom": 1.0}]
  })");
}

}  // namespace

TEST_CASE("standard form maps linear pieces faithfully") {
  ConicProgram p;
  const int x = p.new_var("x");
  p.objective = LinExpr::variable(x);
  p.objective.constant = 3.0;
  LinExpr ge1 = LinExpr(1.0);  // 1 - x <= 0, i.e. x >= 1
  ge1.add_term(x, -1.0);
  p.ineq.push_back(ge1);

  const StandardForm f = to_standard_form(p);
  CHECK(f.objective_constant == doctest::Approx(3.0));
  CHECK(f.n_orthant == 1);
  CHECK(f.soc_dims.empty());

  ConicSolver solver(f.G, f.A, f.c, f.h, f.b, f.n_orthant, f.soc_dims);
  const ConicSolution sol = solver.solve();
  REQUIRE(sol.status == ConicStatus::optimal);
  CHECK(sol.x(0) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("rotated cones reduce to plain cones") {
  // min t s.t. t >= x^2, x = 2  ->  t = 4
  ConicProgram p;
  const int x = p.new_var("x");
  const int t = p.new_var("t");
  p.objective = LinExpr::variable(t);
  LinExpr fix = LinExpr::variable(x);
  fix.constant = -2.0;
  p.eq.push_back(fix);
  ConicProgram::Rsoc r;
  r.u = LinExpr::variable(t);
  r.v = LinExpr(0.5);
  r.w.push_back(LinExpr::variable(x));
  p.rsocs.push_back(r);

  const StandardForm f = to_standard_form(p);
  ConicSolver solver(f.G, f.A, f.c, f.h, f.b, f.n_orthant, f.soc_dims);
  const ConicSolution sol = solver.solve();
  REQUIRE(sol.status == ConicStatus::optimal);
  CHECK(sol.x(t) == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("deterministic single-generator dispatch") {
  const GridCase grid = tiny_case(false);
  ScenarioConfig cfg;
  cfg.horizon = 4;
  const BuildResult built = build(grid, {}, cfg);
  const PolicySolution sol = solve_scenario(built, grid);
  REQUIRE(sol.status == SolveStatus::optimal);

  // balance forces u(t) = -d(t) = 1 + 0.1 sin(...) exactly
  const auto* dev = sol.device_at(1);
  REQUIRE(dev != nullptr);
  for (int t = 1; t <= 4; ++t) {
    const double demand = 1.0 + 0.1 * std::sin(2.0 * M_PI * (t - 1) / 4.0);
    CHECK(dev->mean(t - 1) == doctest::Approx(demand).epsilon(1e-6));
  }
  // no uncertainty: response matrices vanish
  for (const auto& M : dev->response) {
    CHECK(M.lpNorm<Eigen::Infinity>() < 1e-9);
  }
  CHECK(sol.max_balance_residual < 1e-12);
}

TEST_CASE("single uncertain bus forces the response to mirror the factor") {
  const GridCase grid = tiny_case(true);
  ScenarioConfig cfg;
  cfg.horizon = 12;
  std::map<int, Forecast> fc;
  fc[2] = artificial_forecast(1.0, 12, artificial_factor_t12());
  const BuildResult built = build(grid, fc, cfg);
  const PolicySolution sol = solve_scenario(built, grid);
  REQUIRE(sol.status == SolveStatus::optimal);

  // Only one balancing device, so (11b) pins G = -L
  const auto* dev = sol.device_at(1);
  REQUIRE(dev != nullptr);
  REQUIRE(dev->response.size() == 1);
  const Eigen::MatrixXd want = -fc[2].factor;
  CHECK((dev->response[0] - want).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(sol.max_balance_residual < 1e-12);
}

TEST_CASE("case5 scenario S2 solves, balances, and beats S1 on cost") {
  RunManifest m;
  m.case_path = kDataDir + "/case5.json";
  m.horizon = 24;
  m.factor_path = kDataDir + "/factor_t24.json";
  m.samples = 500;

  m.scenario = "s2";
  const ScenarioResult s2 = run_scenario(m);
  REQUIRE(s2.solution.status == SolveStatus::optimal);
  CHECK(s2.solution.max_balance_residual < 1e-8);
  CHECK(s2.solution.duality_gap <= 1e-7);

  m.scenario = "s1";
  const ScenarioResult s1 = run_scenario(m);
  REQUIRE(s1.solution.status == SolveStatus::optimal);
  CHECK(s2.solution.objective <=
        s1.solution.objective * (1.0 + 1e-6) + 1e-9);
}

TEST_CASE("re-solving gives the same objective") {
  RunManifest m;
  m.case_path = kDataDir + "/case5.json";
  m.horizon = 24;
  m.factor_path = kDataDir + "/factor_t24.json";
  m.samples = 100;
  const ScenarioResult a = run_scenario(m);
  const ScenarioResult b = run_scenario(m);
  REQUIRE(a.solution.status == SolveStatus::optimal);
  CHECK(std::fabs(a.solution.objective - b.solution.objective) <=
        1e-6 * std::max(1.0, std::fabs(a.solution.objective)));
}

TEST_CASE("diagnostics flag the documented failure modes") {
  RunManifest m;
  m.horizon = 24;
  m.factor_path = kDataDir + "/factor_t24.json";
  m.samples = 100;

  SUBCASE("demand above capacity") {
    m.case_path = kDataDir + "/case5_overload.json";
    const GridCase grid = parse_case_file(m.case_path);
    const auto fc = resolve_forecasts(grid, m);
    const auto flags = diagnose_infeasibility(grid, fc, m.to_config());
    CHECK(std::find(flags.begin(), flags.end(), "demand-exceeds-capacity") != flags.end());
  }
  SUBCASE("ramp-limited step") {
    m.case_path = kDataDir + "/case5_rampbound.json";
    const GridCase grid = parse_case_file(m.case_path);
    const auto fc = resolve_forecasts(grid, m);
    const auto flags = diagnose_infeasibility(grid, fc, m.to_config());
    CHECK(std::find(flags.begin(), flags.end(), "ramp-limited") != flags.end());
    CHECK(std::find(flags.begin(), flags.end(), "demand-exceeds-capacity") == flags.end());
  }
  SUBCASE("healthy case raises no flags") {
    m.case_path = kDataDir + "/case5.json";
    const GridCase grid = parse_case_file(m.case_path);
    const auto fc = resolve_forecasts(grid, m);
    CHECK(diagnose_infeasibility(grid, fc, m.to_config()).empty());
  }
}

TEST_CASE("solver tolerance honors the environment override") {
  setenv("STOCHOPF_SOLVER_TOL", "1e-6", 1);
  const SolveOptions o = solve_options_from_env();
  unsetenv("STOCHOPF_SOLVER_TOL");
  CHECK(o.feastol == doctest::Approx(1e-6));
  CHECK(o.reltol == doctest::Approx(1e-6));
  CHECK(solve_options_from_env().feastol == doctest::Approx(1e-8));
}

TEST_CASE("variance caps only tighten the feasible set") {
  RunManifest m;
  m.case_path = kDataDir + "/case5.json";
  m.horizon = 24;
  m.factor_path = kDataDir + "/factor_t24_calm.json";
  m.samples = 100;

  m.scenario = "s2";
  const ScenarioResult s2 = run_scenario(m);
  m.scenario = "s3";
  const ScenarioResult s3 = run_scenario(m);
  REQUIRE(s2.solution.status == SolveStatus::optimal);
  REQUIRE(s3.solution.status == SolveStatus::optimal);
  CHECK(s3.solution.objective >= s2.solution.objective * (1.0 - 1e-6) - 1e-9);
}
