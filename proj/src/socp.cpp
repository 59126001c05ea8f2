#include "stochopf/socp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace stochopf {

void ScenarioConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 0.1)) {
    throw ValidationError("risk level epsilon must lie in (0, 0.1]");
  }
  if (variance_cap && *variance_cap <= 0.0) {
    throw ValidationError("variance cap must be > 0 when present");
  }
  if (horizon < 2) throw ValidationError("horizon must be >= 2");
  if (h <= 0.0) throw ValidationError("step length h must be > 0");
}

std::string ScenarioConfig::scenario_name() const {
  if (!storage_enabled) return "s1";
  return variance_cap ? "s3" : "s2";
}

int ConicProgram::new_var(const std::string& name) {
  var_names.push_back(name);
  return num_vars++;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::ordered_json expr_json(const LinExpr& e) {
  nlohmann::ordered_json j;
  j["const"] = fmt_double(e.constant);
  nlohmann::ordered_json terms = nlohmann::ordered_json::array();
  for (const auto& [id, c] : e.terms) {
    terms.push_back({{"var", id}, {"coef", fmt_double(c)}});
  }
  j["terms"] = std::move(terms);
  return j;
}

}  // namespace

std::string ConicProgram::debug_dump() const {
  nlohmann::ordered_json j;
  j["num_vars"] = num_vars;
  j["var_names"] = var_names;
  j["objective"] = expr_json(objective);
  j["eq"] = nlohmann::ordered_json::array();
  for (const auto& e : eq) j["eq"].push_back(expr_json(e));
  j["ineq"] = nlohmann::ordered_json::array();
  for (const auto& e : ineq) j["ineq"].push_back(expr_json(e));
  j["socs"] = nlohmann::ordered_json::array();
  for (const auto& s : socs) {
    nlohmann::ordered_json js;
    js["bound"] = expr_json(s.bound);
    js["args"] = nlohmann::ordered_json::array();
    for (const auto& a : s.norm_args) js["args"].push_back(expr_json(a));
    j["socs"].push_back(std::move(js));
  }
  j["rsocs"] = nlohmann::ordered_json::array();
  for (const auto& r : rsocs) {
    nlohmann::ordered_json jr;
    jr["u"] = expr_json(r.u);
    jr["v"] = expr_json(r.v);
    jr["w"] = nlohmann::ordered_json::array();
    for (const auto& a : r.w) jr["w"].push_back(expr_json(a));
    j["rsocs"].push_back(std::move(jr));
  }
  return j.dump(1);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double lambda_of_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 0.5)) {
    throw std::domain_error("lambda_of_epsilon requires epsilon in (0, 0.5]");
  }
  const double target = 1.0 - epsilon;
  double lo = 0.0, hi = 10.0;
  // bisection to well below the 1e-10 probability tolerance
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std_normal_cdf(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-14) break;
  }
  return 0.5 * (lo + hi);
}

namespace {

// When every germ coefficient is a fixed number the norm is a constant
// and the cone collapses to a linear row.
std::optional<double> constant_norm(const AffineForm& form) {
  double ss = 0.0;
  for (const auto& [coord, e] : form.coeffs) {
    if (!e.is_constant()) return std::nullopt;
    ss += e.constant * e.constant;
  }
  return std::sqrt(ss);
}

}  // namespace

void add_chance_constraint(ConicProgram& p, const AffineForm& form,
                           std::optional<double> lower, std::optional<double> upper,
                           double epsilon) {
  if (lower && upper && *lower > *upper) {
    throw BuildError("chance constraint with lower bound above upper bound");
  }
  const double lambda = lambda_of_epsilon(epsilon);
  const std::optional<double> sigma_const = constant_norm(form);

  if (sigma_const) {
    // mean +/- lambda*sigma against the bounds, all affine
    if (upper) {
      LinExpr e = form.mean;
      e.constant += lambda * *sigma_const - *upper;
      p.ineq.push_back(std::move(e));
    }
    if (lower) {
      LinExpr e = form.mean;
      e *= -1.0;
      e.constant += lambda * *sigma_const + *lower;
      p.ineq.push_back(std::move(e));
    }
    return;
  }

  auto scaled_coeffs = [&]() {
    std::vector<LinExpr> args;
    args.reserve(form.coeffs.size());
    for (const auto& [coord, e] : form.coeffs) {
      LinExpr a = e;
      a *= lambda;
      args.push_back(std::move(a));
    }
    return args;
  };

  if (upper) {
    ConicProgram::Soc soc;
    soc.norm_args = scaled_coeffs();
    soc.bound = LinExpr(*upper);
    soc.bound -= form.mean;
    p.socs.push_back(std::move(soc));
  }
  if (lower) {
    ConicProgram::Soc soc;
    soc.norm_args = scaled_coeffs();
    soc.bound = form.mean;
    soc.bound.constant -= *lower;
    p.socs.push_back(std::move(soc));
  }
}

void add_std_cap(ConicProgram& p, const AffineForm& form, double sigma_max) {
  if (sigma_max <= 0.0) throw BuildError("std cap must be > 0");
  const std::optional<double> sigma_const = constant_norm(form);
  if (sigma_const) {
    LinExpr e(*sigma_const - sigma_max);
    p.ineq.push_back(std::move(e));
    return;
  }
  ConicProgram::Soc soc;
  soc.norm_args.reserve(form.coeffs.size());
  for (const auto& [coord, e] : form.coeffs) soc.norm_args.push_back(e);
  soc.bound = LinExpr(sigma_max);
  p.socs.push_back(std::move(soc));
}

void add_balance(ConicProgram& p, const PolicyVars& pv,
                 const std::map<int, Forecast>& forecasts, const GridCase& grid,
                 const GermIndex& germ) {
  const int T = pv.horizon();

  // mean balance per time step
  for (int t = 1; t <= T; ++t) {
    LinExpr e;
    for (const auto& [bus, f] : forecasts) {
      e.constant += f.mean(t - 1);
    }
    for (const auto& d : pv.devices()) {
      e.add_term(pv.mean_var(d, t), 1.0);
    }
    p.eq.push_back(std::move(e));
  }

  // one equality per disturbance germ coordinate and triangle position
  const auto& dist = pv.disturbance_buses();
  for (int j = 0; j < static_cast<int>(dist.size()); ++j) {
    const auto fit = forecasts.find(dist[j]);
    if (fit == forecasts.end()) {
      throw BuildError("missing forecast for disturbance bus " + std::to_string(dist[j]));
    }
    const Forecast& f = fit->second;
    for (int t = 1; t <= T; ++t) {
      for (int k = 1; k <= t; ++k) {
        LinExpr e(f.factor(t - 1, k - 1));
        for (const auto& d : pv.devices()) {
          e.add_term(pv.matrix_var(d, j, t, k), 1.0);
        }
        p.eq.push_back(std::move(e));
      }
    }
  }
}

void add_objective(ConicProgram& p, const GridCase& grid, const PolicyVars& pv,
                   const GermIndex& germ) {
  const int T = pv.horizon();
  for (const Generator& g : grid.generators) {
    const PolicyVars::Device* d = pv.device_at_bus(g.bus);
    if (d == nullptr || d->is_storage) continue;
    for (int t = 1; t <= T; ++t) {
      // epigraph q >= E[u]^2 + Var(u) = E[u^2]
      const AffineForm u = generation_form(pv, *d, t, germ);
      const int q = p.new_var("epi_u2_bus" + std::to_string(g.bus) + "_t" + std::to_string(t));
      ConicProgram::Rsoc cone;
      cone.u = LinExpr::variable(q);
      cone.v = LinExpr(0.5);
      cone.w.push_back(u.mean);
      for (const auto& [coord, e] : u.coeffs) cone.w.push_back(e);
      p.rsocs.push_back(std::move(cone));

      p.objective.add_term(q, g.gamma2);
      p.objective.add_term(pv.mean_var(*d, t), g.gamma1);
      p.objective.constant += g.gamma0;
    }
  }
}

void add_storage_constraints(ConicProgram& p, const GridCase& grid, const PolicyVars& pv,
                             const GermIndex& germ, const ScenarioConfig& config) {
  if (!config.storage_enabled) return;
  const int T = pv.horizon();
  for (const Storage& s : grid.storages) {
    const PolicyVars::Device* d = pv.device_at_bus(s.bus);
    if (d == nullptr || !d->is_storage) continue;

    for (int t = 1; t <= T; ++t) {
      add_chance_constraint(p, storage_injection_form(pv, *d, t, germ), s.s_min, s.s_max,
                            config.epsilon);
    }
    for (int state = 2; state <= T + 1; ++state) {
      const AffineForm e = storage_state_form(pv, *d, state, config.h, s.e_ic_mean,
                                              s.e_ic_var, germ);
      add_chance_constraint(p, e, s.e_min, s.e_max, config.epsilon);
      if (state == T) {
        const double lo =
            config.terminal_band_fraction ? s.e_term_min * s.e_max : s.e_term_min;
        const double hi =
            config.terminal_band_fraction ? s.e_term_max * s.e_max : s.e_term_max;
        add_chance_constraint(p, e, lo, hi, config.epsilon);
      }
    }
  }
}

BuildResult build(const GridCase& grid, const std::map<int, Forecast>& forecasts,
                  const ScenarioConfig& config) {
  config.validate();
  const int T = config.horizon;

  BuildResult r;
  r.config = config;
  r.lambda = lambda_of_epsilon(config.epsilon);

  // Resolve per-bus forecasts: provided ones for disturbance buses,
  // deterministic artificial profiles for fixed loads.
  std::vector<int> dist_buses;
  for (const DisturbanceRef& d : grid.disturbances) {
    auto it = forecasts.find(d.bus);
    if (it == forecasts.end()) {
      throw BuildError("missing forecast for disturbance bus " + std::to_string(d.bus));
    }
    if (it->second.horizon != T) {
      throw BuildError("forecast horizon mismatch at bus " + std::to_string(d.bus));
    }
    it->second.validate();
    r.forecasts[d.bus] = it->second;
    dist_buses.push_back(d.bus);
  }
  for (const FixedLoad& l : grid.loads) {
    // a disturbance at the same bus replaces the nominal load
    if (r.forecasts.count(l.bus)) continue;
    r.forecasts[l.bus] = artificial_forecast(l.d_nom, T);
  }

  std::vector<int> gen_buses;
  for (const Generator& g : grid.generators) gen_buses.push_back(g.bus);
  std::vector<int> sto_buses;
  std::vector<int> ic_buses;
  if (config.storage_enabled) {
    for (const Storage& s : grid.storages) {
      sto_buses.push_back(s.bus);
      if (s.e_ic_var > 0.0) ic_buses.push_back(s.bus);
    }
  }
  if (gen_buses.empty() && sto_buses.empty()) {
    throw BuildError("case has no dispatchable devices");
  }

  r.germ = GermIndex(dist_buses, T, ic_buses);
  r.policy = PolicyVars(gen_buses, sto_buses, dist_buses, T, config.balancing);
  r.policy_var_count = r.policy.num_vars();

  const long long expected = PolicyVars::count_decision_vars(
      config.balancing, static_cast<long long>(gen_buses.size()),
      static_cast<long long>(sto_buses.size()), static_cast<long long>(dist_buses.size()),
      T);
  if (expected != r.policy_var_count) {
    throw BuildError("policy variable count does not match the closed form");
  }

  ConicProgram& p = r.program;
  p.num_vars = r.policy_var_count;
  p.var_names.resize(p.num_vars);
  for (const auto& d : r.policy.devices()) {
    const std::string tag = (d.is_storage ? "s_bus" : "u_bus") + std::to_string(d.bus);
    for (int t = 1; t <= T; ++t) {
      p.var_names[r.policy.mean_var(d, t)] = tag + "_mean_t" + std::to_string(t);
    }
    const int n_slots = config.balancing == Balancing::local
                            ? static_cast<int>(dist_buses.size())
                            : 1;
    for (int j = 0; j < n_slots; ++j) {
      for (int t = 1; t <= T; ++t) {
        for (int k = 1; k <= t; ++k) {
          p.var_names[r.policy.matrix_var(d, j, t, k)] =
              tag + "_M" + std::to_string(j) + "_" + std::to_string(t) + "_" +
              std::to_string(k);
        }
      }
    }
  }

  add_balance(p, r.policy, r.forecasts, grid, r.germ);

  // generator output and ramp bands
  for (const Generator& g : grid.generators) {
    const PolicyVars::Device* d = r.policy.device_at_bus(g.bus);
    for (int t = 1; t <= T; ++t) {
      add_chance_constraint(p, generation_form(r.policy, *d, t, r.germ), g.u_min, g.u_max,
                            config.epsilon);
    }
    for (int tau = 2; tau <= T; ++tau) {
      add_chance_constraint(p, ramp_form(r.policy, *d, tau, r.germ), g.du_min, g.du_max,
                            config.epsilon);
    }
    if (config.variance_cap) {
      for (int t = 1; t <= T; ++t) {
        add_std_cap(p, generation_form(r.policy, *d, t, r.germ), *config.variance_cap);
      }
    }
  }

  add_storage_constraints(p, grid, r.policy, r.germ, config);

  // line flow bands
  r.ptdf = compute_ptdf(grid);
  const int n = grid.num_buses();
  for (int t = 1; t <= T; ++t) {
    std::vector<AffineForm> nodal(n);
    for (int i = 0; i < n; ++i) {
      nodal[i] = net_power_form(grid, r.forecasts, r.policy, r.germ, grid.buses[i], t);
    }
    for (int li = 0; li < static_cast<int>(grid.lines.size()); ++li) {
      const Line& l = grid.lines[li];
      std::optional<double> lo, hi;
      if (std::isfinite(l.c_min)) lo = l.c_min;
      if (std::isfinite(l.c_max)) hi = l.c_max;
      if (!lo && !hi) continue;  // unconstrained line
      add_chance_constraint(p, line_flow_form(r.ptdf.phi, li, nodal), lo, hi,
                            config.epsilon);
    }
  }

  add_objective(p, grid, r.policy, r.germ);
  r.epigraph_var_count = p.num_vars - r.policy_var_count;
  return r;
}

}  // namespace stochopf
