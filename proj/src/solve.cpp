#include "stochopf/solve.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>

namespace stochopf {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

SolveOptions solve_options_from_env() {
  SolveOptions o;
  if (const char* tol = std::getenv("STOCHOPF_SOLVER_TOL")) {
    const double v = std::atof(tol);
    if (v > 0.0) {
      o.feastol = v;
      o.reltol = v;
    }
  }
  return o;
}

StandardForm to_standard_form(const ConicProgram& p) {
  StandardForm f;
  f.c = Eigen::VectorXd::Zero(p.num_vars);
  for (const auto& [id, coef] : p.objective.terms) f.c(id) = coef;
  f.objective_constant = p.objective.constant;

  std::vector<Eigen::Triplet<double>> at, gt;
  std::vector<double> bvals, hvals;

  for (const LinExpr& e : p.eq) {
    const int row = static_cast<int>(bvals.size());
    for (const auto& [id, coef] : e.terms) at.emplace_back(row, id, coef);
    bvals.push_back(-e.constant);
  }

  // orthant rows: expr <= 0 becomes s = -expr >= 0
  auto push_orthant = [&](const LinExpr& e) {
    const int row = static_cast<int>(hvals.size());
    for (const auto& [id, coef] : e.terms) gt.emplace_back(row, id, coef);
    hvals.push_back(-e.constant);
  };
  for (const LinExpr& e : p.ineq) push_orthant(e);

  // degenerate cones collapse to orthant rows
  for (const auto& soc : p.socs) {
    if (soc.norm_args.empty()) {
      LinExpr e = soc.bound;
      e *= -1.0;
      push_orthant(e);
    }
  }
  for (const auto& r : p.rsocs) {
    if (r.w.empty()) {
      LinExpr u = r.u;
      u *= -1.0;
      push_orthant(u);
      LinExpr v = r.v;
      v *= -1.0;
      push_orthant(v);
    }
  }
  f.n_orthant = static_cast<int>(hvals.size());

  auto push_cone_row = [&](const LinExpr& e, double sign) {
    // s_row = sign * expr: G row = -sign*terms, h = sign*constant
    const int row = static_cast<int>(hvals.size());
    for (const auto& [id, coef] : e.terms) gt.emplace_back(row, id, -sign * coef);
    hvals.push_back(sign * e.constant);
  };

  for (const auto& soc : p.socs) {
    if (soc.norm_args.empty()) continue;
    f.soc_dims.push_back(1 + static_cast<int>(soc.norm_args.size()));
    push_cone_row(soc.bound, 1.0);
    for (const auto& a : soc.norm_args) push_cone_row(a, 1.0);
  }
  constexpr double kSqrt2 = 1.4142135623730951;
  for (const auto& r : p.rsocs) {
    if (r.w.empty()) continue;
    f.soc_dims.push_back(2 + static_cast<int>(r.w.size()));
    LinExpr sum = r.u;
    sum += r.v;
    LinExpr diff = r.u;
    diff -= r.v;
    push_cone_row(sum, 1.0);
    push_cone_row(diff, 1.0);
    for (const auto& w : r.w) {
      LinExpr ws = w;
      ws *= kSqrt2;
      push_cone_row(ws, 1.0);
    }
  }

  f.A.resize(static_cast<int>(bvals.size()), p.num_vars);
  f.A.setFromTriplets(at.begin(), at.end());
  f.G.resize(static_cast<int>(hvals.size()), p.num_vars);
  f.G.setFromTriplets(gt.begin(), gt.end());
  f.b = Eigen::Map<Eigen::VectorXd>(bvals.data(), static_cast<int>(bvals.size()));
  f.h = Eigen::Map<Eigen::VectorXd>(hvals.data(), static_cast<int>(hvals.size()));
  return f;
}

const PolicySolution::DevicePolicy* PolicySolution::device_at(int bus) const {
  for (const auto& d : devices) {
    if (d.bus == bus) return &d;
  }
  return nullptr;
}

std::vector<std::string> diagnose_infeasibility(const GridCase& grid,
                                                const std::map<int, Forecast>& forecasts,
                                                const ScenarioConfig& config) {
  std::vector<std::string> flags;
  const int T = config.horizon;

  // mirror build(): fixed loads enter as deterministic profiles unless a
  // disturbance replaces them
  std::map<int, Forecast> all = forecasts;
  for (const FixedLoad& l : grid.loads) {
    if (!all.count(l.bus)) all[l.bus] = artificial_forecast(l.d_nom, T);
  }

  double u_cap = 0.0, ramp_up = 0.0, ramp_down = 0.0;
  for (const Generator& g : grid.generators) {
    u_cap += g.u_max;
    ramp_up += g.du_max;
    ramp_down += -g.du_min;
  }
  double s_cap = 0.0, s_swing = 0.0;
  if (config.storage_enabled) {
    for (const Storage& s : grid.storages) {
      s_cap += s.s_max;
      s_swing += s.s_max - s.s_min;
    }
  }

  // demand(t) = -(sum of mean injections of loads and disturbances)
  std::vector<double> demand(T, 0.0);
  for (int t = 0; t < T; ++t) {
    for (const auto& [bus, f] : all) demand[t] -= f.mean(t);
  }

  bool over_capacity = false;
  for (int t = 0; t < T; ++t) {
    if (demand[t] > u_cap + s_cap + 1e-9) over_capacity = true;
  }
  if (over_capacity) flags.push_back("demand-exceeds-capacity");

  bool ramp_limited = false;
  for (int t = 1; t < T; ++t) {
    const double jump = demand[t] - demand[t - 1];
    if (jump > ramp_up + s_swing + 1e-9) ramp_limited = true;
    if (-jump > ramp_down + s_swing + 1e-9) ramp_limited = true;
  }
  if (ramp_limited) flags.push_back("ramp-limited");

  return flags;
}

namespace {

// Distribute balance residuals uniformly over the devices so Eq-type
// identities hold to machine precision in the extracted parameters.
void project_balance(const BuildResult& built, Eigen::VectorXd& x) {
  const PolicyVars& pv = built.policy;
  const int T = pv.horizon();
  const auto& devices = pv.devices();
  if (devices.empty()) return;
  const double inv_n = 1.0 / static_cast<double>(devices.size());

  for (int t = 1; t <= T; ++t) {
    double r = 0.0;
    for (const auto& [bus, f] : built.forecasts) r += f.mean(t - 1);
    for (const auto& d : devices) r += x(pv.mean_var(d, t));
    for (const auto& d : devices) x(pv.mean_var(d, t)) -= r * inv_n;
  }

  const auto& dist = pv.disturbance_buses();
  for (int j = 0; j < static_cast<int>(dist.size()); ++j) {
    const Forecast& f = built.forecasts.at(dist[j]);
    for (int t = 1; t <= T; ++t) {
      for (int k = 1; k <= t; ++k) {
        double r = f.factor(t - 1, k - 1);
        for (const auto& d : devices) r += x(pv.matrix_var(d, j, t, k));
        for (const auto& d : devices) x(pv.matrix_var(d, j, t, k)) -= r * inv_n;
      }
    }
  }
}

double balance_residual(const BuildResult& built, const Eigen::VectorXd& x) {
  const PolicyVars& pv = built.policy;
  const int T = pv.horizon();
  double worst = 0.0;
  for (int t = 1; t <= T; ++t) {
    double r = 0.0;
    for (const auto& [bus, f] : built.forecasts) r += f.mean(t - 1);
    for (const auto& d : pv.devices()) r += x(pv.mean_var(d, t));
    worst = std::max(worst, std::fabs(r));
  }
  const auto& dist = pv.disturbance_buses();
  for (int j = 0; j < static_cast<int>(dist.size()); ++j) {
    const Forecast& f = built.forecasts.at(dist[j]);
    for (int t = 1; t <= T; ++t) {
      for (int k = 1; k <= t; ++k) {
        double r = f.factor(t - 1, k - 1);
        for (const auto& d : pv.devices()) r += x(pv.matrix_var(d, j, t, k));
        worst = std::max(worst, std::fabs(r));
      }
    }
  }
  return worst;
}

}  // namespace

PolicySolution solve_scenario(const BuildResult& built, const GridCase& grid,
                              const SolveOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();

  StandardForm f = to_standard_form(built.program);

  SolverSettings settings;
  settings.feastol = options.feastol;
  settings.abstol = options.feastol;
  settings.reltol = options.reltol;
  settings.max_iters = options.max_iters;
  settings.verbose = options.verbose;

  ConicSolver solver(f.G, f.A, f.c, f.h, f.b, f.n_orthant, f.soc_dims, settings);
  ConicSolution sol = solver.solve();

  PolicySolution out;
  out.iterations = sol.iterations;
  out.duality_gap = sol.relative_gap;
  switch (sol.status) {
    case ConicStatus::optimal:
      out.status = SolveStatus::optimal;
      break;
    case ConicStatus::near_optimal:
      // reduced-accuracy exits count as solved only when the gap still
      // meets the documented 1e-7 relative bound
      out.status = sol.relative_gap >= 0.0 && sol.relative_gap <= 1e-7
                       ? SolveStatus::optimal
                       : SolveStatus::numerical_failure;
      break;
    case ConicStatus::primal_infeasible:
      out.status = SolveStatus::infeasible;
      break;
    case ConicStatus::dual_infeasible:
      out.status = SolveStatus::unbounded;
      break;
    default:
      out.status = SolveStatus::numerical_failure;
      break;
  }

  if (out.status != SolveStatus::optimal) {
    out.infeasibility_flags =
        diagnose_infeasibility(grid, built.forecasts, built.config);
    out.solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }

  out.raw_x = sol.x;
  project_balance(built, out.raw_x);
  out.max_balance_residual = balance_residual(built, out.raw_x);
  out.objective = built.program.objective.eval(out.raw_x);

  const PolicyVars& pv = built.policy;
  const int T = pv.horizon();
  const int nd = static_cast<int>(pv.disturbance_buses().size());
  for (const auto& d : pv.devices()) {
    PolicySolution::DevicePolicy dp;
    dp.bus = d.bus;
    dp.is_storage = d.is_storage;
    dp.mean.resize(T);
    for (int t = 1; t <= T; ++t) dp.mean(t - 1) = out.raw_x(pv.mean_var(d, t));
    for (int j = 0; j < nd; ++j) {
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(T, T);
      for (int t = 1; t <= T; ++t) {
        for (int k = 1; k <= t; ++k) {
          M(t - 1, k - 1) = out.raw_x(pv.matrix_var(d, j, t, k));
        }
      }
      dp.response.push_back(std::move(M));
    }
    out.devices.push_back(std::move(dp));
  }

  out.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace stochopf
