#include "stochopf/validate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "json.hpp"
#include "stochopf/kernels.hpp"

namespace stochopf {

namespace {

struct Philox4x32 {
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static void round(std::uint32_t ctr[4], const std::uint32_t key[2]) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t out[4] = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    ctr[0] = out[0];
    ctr[1] = out[1];
    ctr[2] = out[2];
    ctr[3] = out[3];
  }

  static void block(std::uint64_t key64, std::uint64_t counter, std::uint32_t out[4]) {
    std::uint32_t key[2] = {static_cast<std::uint32_t>(key64),
                            static_cast<std::uint32_t>(key64 >> 32)};
    out[0] = static_cast<std::uint32_t>(counter);
    out[1] = static_cast<std::uint32_t>(counter >> 32);
    out[2] = 0u;
    out[3] = 0u;
    for (int r = 0; r < 10; ++r) {
      round(out, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
  }
};

inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t x = (static_cast<std::uint64_t>(hi) << 32) | lo;
  // 53 significant bits, shifted half a step into (0, 1)
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

double counter_normal(std::uint64_t seed, std::uint64_t index) {
  std::uint32_t w[4];
  Philox4x32::block(seed, index, w);
  const double u1 = to_unit(w[0], w[1]);
  const double u2 = to_unit(w[2], w[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SampleBatch sample_germ(int n, std::uint64_t seed, int dimension) {
  if (n < 0 || dimension < 0) throw ValidationError("sample_germ requires n, dim >= 0");
  SampleBatch b;
  b.n = n;
  b.seed = seed;
  b.dimension = dimension;
  b.data.resize(static_cast<std::size_t>(n) * dimension);
  for (int c = 0; c < dimension; ++c) {
    double* row = b.data.data() + static_cast<std::size_t>(c) * n;
    for (int s = 0; s < n; ++s) {
      row[s] = counter_normal(seed, static_cast<std::uint64_t>(s) * dimension + c);
    }
  }
  return b;
}

void realize_into(const NumericForm& form, const SampleBatch& batch, double* out) {
  std::fill(out, out + batch.n, form.mean);
  for (const auto& [coord, c] : form.coeffs) {
    kernels::axpy(c, batch.row(coord), out, batch.n);
  }
}

bool ValidationReport::all_pass() const {
  for (const auto& c : constraints) {
    if (!c.pass) return false;
  }
  for (const auto& m : moments) {
    if (!m.mean_pass || !m.var_pass) return false;
  }
  return true;
}

double ValidationReport::worst_violation_rate() const {
  double worst = 0.0;
  for (const auto& c : constraints) worst = std::max(worst, c.empirical_rate);
  return worst;
}

namespace {
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}
}  // namespace

std::string ValidationReport::to_json() const {
  nlohmann::ordered_json j;
  j["samples"] = samples;
  j["seed"] = seed;
  j["epsilon"] = fmt(epsilon);
  j["max_balance_residual"] = fmt(max_balance_residual);
  j["max_storage_path_mismatch"] = fmt(max_storage_path_mismatch);
  j["max_telescoping_residual"] = fmt(max_telescoping_residual);
  j["all_pass"] = all_pass();
  j["constraints"] = nlohmann::ordered_json::array();
  for (const auto& c : constraints) {
    j["constraints"].push_back({{"quantity", c.quantity},
                                {"id", c.id},
                                {"t", c.t},
                                {"side", c.side},
                                {"bound", fmt(c.bound)},
                                {"analytic_prob", fmt(c.analytic_prob)},
                                {"empirical_rate", fmt(c.empirical_rate)},
                                {"stderr", fmt(c.stderr_est)},
                                {"pass", c.pass}});
  }
  j["moments"] = nlohmann::ordered_json::array();
  for (const auto& m : moments) {
    j["moments"].push_back({{"quantity", m.quantity},
                            {"id", m.id},
                            {"t", m.t},
                            {"analytic_mean", fmt(m.analytic_mean)},
                            {"analytic_var", fmt(m.analytic_var)},
                            {"sample_mean", fmt(m.sample_mean)},
                            {"sample_var", fmt(m.sample_var)},
                            {"mean_pass", m.mean_pass},
                            {"var_pass", m.var_pass}});
  }
  return j.dump(1);
}

namespace {

MomentCheck moment_check(const std::string& quantity, int id, int t, const NumericForm& form,
                         const double* realized, int n) {
  MomentCheck m;
  m.quantity = quantity;
  m.id = id;
  m.t = t;
  m.analytic_mean = form.mean;
  m.analytic_var = form.variance();
  kernels::mean_var(realized, n, &m.sample_mean, &m.sample_var);
  const double se = std::sqrt(std::max(m.analytic_var, m.sample_var) / n);
  m.mean_pass = std::fabs(m.sample_mean - m.analytic_mean) <= std::max(4.0 * se, 1e-9);
  // 5% relative at the release sample count; smaller runs get the
  // 4-sigma chi-square bound instead
  const double var_tol =
      std::max(0.05, 4.0 * std::sqrt(2.0 / std::max(n - 1, 1)));
  if (m.analytic_var > 1e-6) {
    m.var_pass = std::fabs(m.sample_var - m.analytic_var) <= var_tol * m.analytic_var;
  } else {
    m.var_pass = m.sample_var <= 1e-6 * (1.0 + var_tol) + 1e-12;
  }
  return m;
}

ConstraintCheck violation_check(const std::string& quantity, int id, int t,
                                const std::string& side, double bound,
                                const NumericForm& form, const double* realized, int n,
                                double epsilon) {
  ConstraintCheck c;
  c.quantity = quantity;
  c.id = id;
  c.t = t;
  c.side = side;
  c.bound = bound;
  const double sigma = form.std_dev();
  // count violations beyond solver tolerance; rows pinned exactly at a
  // bound would otherwise flip on floating-point noise
  const double slack = 1e-7 + 1e-9 * std::fabs(bound);
  if (side == "upper") {
    const double edge = bound + slack;
    c.analytic_prob = sigma > 0.0 ? 1.0 - std_normal_cdf((edge - form.mean) / sigma)
                                  : (form.mean > edge ? 1.0 : 0.0);
    c.empirical_rate = static_cast<double>(kernels::count_above(realized, n, edge)) / n;
  } else {
    const double edge = bound - slack;
    c.analytic_prob = sigma > 0.0 ? std_normal_cdf((edge - form.mean) / sigma)
                                  : (form.mean < edge ? 1.0 : 0.0);
    c.empirical_rate = static_cast<double>(kernels::count_below(realized, n, edge)) / n;
  }
  c.stderr_est = std::sqrt(std::max(c.analytic_prob * (1.0 - c.analytic_prob),
                                    c.empirical_rate * (1.0 - c.empirical_rate)) /
                           n);
  const double rate_cap = epsilon + 4.0 * std::sqrt(epsilon * (1.0 - epsilon) / n);
  const bool within_risk = c.empirical_rate <= rate_cap;
  const bool matches_analytic =
      std::fabs(c.empirical_rate - c.analytic_prob) <= 4.0 * c.stderr_est + 2.0 / n;
  c.pass = within_risk && matches_analytic;
  return c;
}

}  // namespace

ValidationReport validate_solution(const GridCase& grid, const BuildResult& built,
                                   const PolicySolution& solution,
                                   const ValidationConfig& config) {
  if (solution.status != SolveStatus::optimal) {
    throw ValidationError("validate_solution requires an optimal solution");
  }
  const PolicyVars& pv = built.policy;
  const GermIndex& germ = built.germ;
  const int T = pv.horizon();
  const int n = config.samples;
  const double eps = built.config.epsilon;
  const Eigen::VectorXd& x = solution.raw_x;

  ValidationReport rep;
  rep.samples = n;
  rep.seed = config.seed;
  rep.epsilon = eps;

  const SampleBatch batch = sample_germ(n, config.seed, germ.dimension());

  std::vector<double> buf(n), buf2(n);

  // ---- power balance per sample: realize the summed net-power form
  for (int t = 1; t <= T; ++t) {
    AffineForm total;
    for (int bus : grid.buses) {
      total += net_power_form(grid, built.forecasts, pv, germ, bus, t);
    }
    const NumericForm nf = evaluate(total, x);
    realize_into(nf, batch, buf.data());
    for (int s = 0; s < n; ++s) {
      rep.max_balance_residual = std::max(rep.max_balance_residual, std::fabs(buf[s]));
    }
  }

  // ---- disturbances: moment agreement
  for (const auto& [bus, fc] : built.forecasts) {
    if (fc.deterministic()) continue;
    for (int t = 1; t <= T; ++t) {
      const NumericForm nf = evaluate(disturbance_form(fc, bus, t, germ), x);
      realize_into(nf, batch, buf.data());
      rep.moments.push_back(moment_check("d", bus, t, nf, buf.data(), n));
    }
  }

  // ---- generators: u and du
  for (const Generator& g : grid.generators) {
    const PolicyVars::Device* d = pv.device_at_bus(g.bus);
    for (int t = 1; t <= T; ++t) {
      const NumericForm nf = evaluate(generation_form(pv, *d, t, germ), x);
      realize_into(nf, batch, buf.data());
      rep.moments.push_back(moment_check("u", g.bus, t, nf, buf.data(), n));
      rep.constraints.push_back(
          violation_check("u", g.bus, t, "upper", g.u_max, nf, buf.data(), n, eps));
      rep.constraints.push_back(
          violation_check("u", g.bus, t, "lower", g.u_min, nf, buf.data(), n, eps));
    }
    for (int tau = 2; tau <= T; ++tau) {
      const NumericForm nf = evaluate(ramp_form(pv, *d, tau, germ), x);
      realize_into(nf, batch, buf.data());
      rep.moments.push_back(moment_check("du", g.bus, tau, nf, buf.data(), n));
      rep.constraints.push_back(
          violation_check("du", g.bus, tau, "upper", g.du_max, nf, buf.data(), n, eps));
      rep.constraints.push_back(
          violation_check("du", g.bus, tau, "lower", g.du_min, nf, buf.data(), n, eps));
    }
  }

  // ---- storages: s and e, plus the two-path dynamics cross-check
  if (built.config.storage_enabled) {
    std::vector<double> e_stepped(n), s_real(n);
    for (const Storage& st : grid.storages) {
      const PolicyVars::Device* d = pv.device_at_bus(st.bus);
      if (d == nullptr) continue;

      const NumericForm e_ic = evaluate(
          storage_state_form(pv, *d, 1, built.config.h, st.e_ic_mean, st.e_ic_var, germ), x);
      realize_into(e_ic, batch, e_stepped.data());
      std::vector<double> e_first = e_stepped;

      for (int t = 1; t <= T; ++t) {
        const NumericForm s_form =
            evaluate(storage_injection_form(pv, *d, t, germ), x);
        realize_into(s_form, batch, s_real.data());
        rep.moments.push_back(moment_check("s", st.bus, t, s_form, s_real.data(), n));
        rep.constraints.push_back(
            violation_check("s", st.bus, t, "upper", st.s_max, s_form, s_real.data(), n, eps));
        rep.constraints.push_back(
            violation_check("s", st.bus, t, "lower", st.s_min, s_form, s_real.data(), n, eps));

        // step the dynamics and compare against the closed form
        kernels::axpy(-built.config.h, s_real.data(), e_stepped.data(), n);
        const NumericForm e_form = evaluate(
            storage_state_form(pv, *d, t + 1, built.config.h, st.e_ic_mean, st.e_ic_var,
                               germ),
            x);
        realize_into(e_form, batch, buf.data());
        for (int s = 0; s < n; ++s) {
          rep.max_storage_path_mismatch =
              std::max(rep.max_storage_path_mismatch, std::fabs(buf[s] - e_stepped[s]));
        }
        rep.moments.push_back(moment_check("e", st.bus, t + 1, e_form, buf.data(), n));
        rep.constraints.push_back(
            violation_check("e", st.bus, t + 1, "upper", st.e_max, e_form, buf.data(), n, eps));
        rep.constraints.push_back(
            violation_check("e", st.bus, t + 1, "lower", st.e_min, e_form, buf.data(), n, eps));
        if (t + 1 == T) {
          const double lo = built.config.terminal_band_fraction ? st.e_term_min * st.e_max
                                                                : st.e_term_min;
          const double hi = built.config.terminal_band_fraction ? st.e_term_max * st.e_max
                                                                : st.e_term_max;
          rep.constraints.push_back(
              violation_check("e", st.bus, t + 1, "upper", hi, e_form, buf.data(), n, eps));
          rep.constraints.push_back(
              violation_check("e", st.bus, t + 1, "lower", lo, e_form, buf.data(), n, eps));
        }
      }

      // telescoping: e(T+1) - e(1) = -h sum_t s(t) is already implied by
      // the stepped path; check the closed forms directly
      const NumericForm e_last = evaluate(
          storage_state_form(pv, *d, T + 1, built.config.h, st.e_ic_mean, st.e_ic_var, germ),
          x);
      realize_into(e_last, batch, buf.data());
      std::fill(buf2.begin(), buf2.end(), 0.0);
      for (int t = 1; t <= T; ++t) {
        const NumericForm s_form = evaluate(storage_injection_form(pv, *d, t, germ), x);
        realize_into(s_form, batch, s_real.data());
        kernels::axpy(built.config.h, s_real.data(), buf2.data(), n);
      }
      for (int s = 0; s < n; ++s) {
        rep.max_telescoping_residual = std::max(
            rep.max_telescoping_residual, std::fabs(buf[s] - e_first[s] + buf2[s]));
      }
    }
  }

  // ---- line flows
  for (int t = 1; t <= T; ++t) {
    std::vector<AffineForm> nodal(grid.num_buses());
    for (int i = 0; i < grid.num_buses(); ++i) {
      nodal[i] = net_power_form(grid, built.forecasts, pv, germ, grid.buses[i], t);
    }
    for (int li = 0; li < static_cast<int>(grid.lines.size()); ++li) {
      const Line& l = grid.lines[li];
      const NumericForm nf = evaluate(line_flow_form(built.ptdf.phi, li, nodal), x);
      realize_into(nf, batch, buf.data());
      rep.moments.push_back(moment_check("c", l.id, t, nf, buf.data(), n));
      if (std::isfinite(l.c_max)) {
        rep.constraints.push_back(
            violation_check("c", l.id, t, "upper", l.c_max, nf, buf.data(), n, eps));
      }
      if (std::isfinite(l.c_min)) {
        rep.constraints.push_back(
            violation_check("c", l.id, t, "lower", l.c_min, nf, buf.data(), n, eps));
      }
    }
  }

  return rep;
}

}  // namespace stochopf
