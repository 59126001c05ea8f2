#include "stochopf/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "json.hpp"

namespace stochopf {

namespace fs = std::filesystem;

void RunManifest::validate() const {
  if (case_path.empty()) throw ValidationError("manifest: case path is required");
  if (scenario != "s1" && scenario != "s2" && scenario != "s3") {
    throw ValidationError("manifest: scenario must be s1, s2 or s3");
  }
  if (balancing != "local" && balancing != "global") {
    throw ValidationError("manifest: balancing must be local or global");
  }
  if (samples < 1) throw ValidationError("manifest: samples must be >= 1");
  if (jobs < 1) throw ValidationError("manifest: jobs must be >= 1");
  if (sweep && sweep_points.empty()) {
    throw ValidationError("manifest: sweep mode requires nonempty sweep points");
  }
}

ScenarioConfig RunManifest::to_config() const {
  ScenarioConfig c;
  c.storage_enabled = scenario != "s1";
  if (scenario == "s3") c.variance_cap = 0.01;
  c.epsilon = epsilon;
  c.balancing = balancing == "local" ? Balancing::local : Balancing::global;
  c.horizon = horizon;
  c.h = 1.0;
  c.terminal_band_fraction = terminal_band_fraction;
  return c;
}

namespace {

std::string fmtg(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string resolve_path(const std::string& path, const std::string& case_path) {
  if (fs::exists(path)) return path;
  const fs::path beside = fs::path(case_path).parent_path() / path;
  if (fs::exists(beside)) return beside.string();
  return path;  // let the open fail with the original name
}

Eigen::MatrixXd load_factor_matrix(const std::string& path, int horizon) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open factor file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ParseError(path + ": invalid JSON: " + e.what());
  }
  if (!doc.contains("factor")) throw ParseError(path + ": missing field 'factor'");
  const auto& rows = doc["factor"];
  if (static_cast<int>(rows.size()) != horizon) {
    throw ParseError(path + ": factor has " + std::to_string(rows.size()) +
                     " rows, expected " + std::to_string(horizon));
  }
  Eigen::MatrixXd m(horizon, horizon);
  for (int r = 0; r < horizon; ++r) {
    if (static_cast<int>(rows[r].size()) != horizon) throw ParseError(path + ": ragged factor");
    for (int c = 0; c < horizon; ++c) m(r, c) = rows[r][c].get<double>();
  }
  return m;
}

double nominal_of(const GridCase& grid, int bus) {
  for (const FixedLoad& l : grid.loads) {
    if (l.bus == bus) return l.d_nom;
  }
  throw ValidationError("disturbance bus " + std::to_string(bus) +
                        " has no nominal load entry to size its forecast");
}

Forecast artificial_for_bus(const GridCase& grid, int bus, const RunManifest& m) {
  const double d_nom = nominal_of(grid, bus);
  if (m.horizon == 12) {
    return artificial_forecast(d_nom, 12, artificial_factor_t12());
  }
  if (m.factor_path.empty()) {
    throw ValidationError(
        "artificial forecasts at horizon != 12 need --factor pointing to a "
        "lower-triangular factor file");
  }
  const Eigen::MatrixXd f =
      load_factor_matrix(resolve_path(m.factor_path, m.case_path), m.horizon);
  return artificial_forecast(d_nom, m.horizon, f);
}

Forecast fit_csv_forecast(const GridCase& grid, int bus, const std::string& csv_path,
                          const RunManifest& m) {
  const HistoricalSeries series = read_series_csv(csv_path);
  const double d_nom = nominal_of(grid, bus);
  const double target_peak = std::fabs(d_nom);
  if (target_peak <= 0.0) {
    throw ValidationError("disturbance bus " + std::to_string(bus) +
                          " has zero nominal power; cannot scale the series");
  }

  std::vector<double> smoothed = smooth_rolling(series.power_mw, 5);
  std::vector<double> scaled = scale_to_capacity(smoothed, target_peak);

  // train on the most recent window to keep the Gram matrix small
  const int max_train = 240;
  const int n = static_cast<int>(scaled.size());
  const int n_train = std::min(n, max_train);
  Eigen::VectorXd times(n_train), values(n_train);
  for (int i = 0; i < n_train; ++i) {
    times(i) = static_cast<double>(n - n_train + i + 1);
    values(i) = scaled[n - n_train + i];
  }

  const GprPosterior post = gpr_fit(times, values, KernelSpec::composite_default(), true);
  Eigen::VectorXd horizon_times(m.horizon);
  for (int t = 0; t < m.horizon; ++t) horizon_times(t) = n + 1 + t;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  post.predict(horizon_times, mean, cov);
  const Eigen::MatrixXd L = factorize(cov, 1e-7);

  // consumption enters negative; a negative nominal marks feed-in
  const double sign = d_nom < 0.0 ? 1.0 : -1.0;
  Forecast f;
  f.horizon = m.horizon;
  f.mean = sign * mean;
  f.factor = sign * L;
  f.validate();
  return f;
}

}  // namespace

std::map<int, Forecast> resolve_forecasts(const GridCase& grid, const RunManifest& m) {
  std::map<int, Forecast> out;
  for (const DisturbanceRef& d : grid.disturbances) {
    // a concrete per-bus source in the case wins over the manifest default
    std::string source = d.forecast.empty() || d.forecast == "artificial"
                             ? m.forecast_source
                             : d.forecast;
    if (source == "artificial") {
      out[d.bus] = artificial_for_bus(grid, d.bus, m);
      continue;
    }
    source = resolve_path(source, m.case_path);
    if (source.size() > 4 && source.substr(source.size() - 4) == ".csv") {
      out[d.bus] = fit_csv_forecast(grid, d.bus, source, m);
    } else {
      Forecast f = forecast_from_json_file(source);
      if (f.horizon != m.horizon) {
        throw ValidationError(source + ": forecast horizon " + std::to_string(f.horizon) +
                              " does not match requested horizon " +
                              std::to_string(m.horizon));
      }
      out[d.bus] = std::move(f);
    }
  }
  return out;
}

ScenarioResult run_scenario(const RunManifest& m) {
  m.validate();
  ScenarioResult r;
  r.grid = parse_case_file(m.case_path);
  const std::map<int, Forecast> forecasts = resolve_forecasts(r.grid, m);
  r.built = build(r.grid, forecasts, m.to_config());
  r.solution = solve_scenario(r.built, r.grid);
  if (r.solution.status == SolveStatus::optimal) {
    ValidationConfig vc;
    vc.samples = m.samples;
    vc.seed = m.seed;
    r.report = validate_solution(r.grid, r.built, r.solution, vc);
  }
  return r;
}

namespace {

struct ScheduleRow {
  const char* quantity;
  int id;
  int t;
  double mean;
  double std;
};

void append_schedule_rows(std::vector<ScheduleRow>& rows, const ScenarioResult& r) {
  const BuildResult& b = r.built;
  const PolicyVars& pv = b.policy;
  const GermIndex& germ = b.germ;
  const Eigen::VectorXd& x = r.solution.raw_x;
  const int T = pv.horizon();

  for (const Generator& g : r.grid.generators) {
    const PolicyVars::Device* d = pv.device_at_bus(g.bus);
    for (int t = 1; t <= T; ++t) {
      const NumericForm nf = evaluate(generation_form(pv, *d, t, germ), x);
      rows.push_back({"u", g.bus, t, nf.mean, nf.std_dev()});
    }
  }
  if (b.config.storage_enabled) {
    for (const Storage& st : r.grid.storages) {
      const PolicyVars::Device* d = pv.device_at_bus(st.bus);
      if (d == nullptr) continue;
      for (int t = 1; t <= T; ++t) {
        const NumericForm nf = evaluate(storage_injection_form(pv, *d, t, germ), x);
        rows.push_back({"s", st.bus, t, nf.mean, nf.std_dev()});
      }
      for (int state = 1; state <= T + 1; ++state) {
        const NumericForm nf = evaluate(
            storage_state_form(pv, *d, state, b.config.h, st.e_ic_mean, st.e_ic_var, germ),
            x);
        rows.push_back({"e", st.bus, state, nf.mean, nf.std_dev()});
      }
    }
  }
  for (int t = 1; t <= T; ++t) {
    std::vector<AffineForm> nodal(r.grid.num_buses());
    for (int i = 0; i < r.grid.num_buses(); ++i) {
      nodal[i] = net_power_form(r.grid, b.forecasts, pv, germ, r.grid.buses[i], t);
    }
    for (int li = 0; li < static_cast<int>(r.grid.lines.size()); ++li) {
      const NumericForm nf = evaluate(line_flow_form(b.ptdf.phi, li, nodal), x);
      rows.push_back({"c", r.grid.lines[li].id, t, nf.mean, nf.std_dev()});
    }
  }
  for (const Generator& g : r.grid.generators) {
    const PolicyVars::Device* d = pv.device_at_bus(g.bus);
    for (int tau = 2; tau <= T; ++tau) {
      const NumericForm nf = evaluate(ramp_form(pv, *d, tau, germ), x);
      rows.push_back({"du", g.bus, tau, nf.mean, nf.std_dev()});
    }
  }
}

}  // namespace

void write_outputs(const RunManifest& m, const ScenarioResult& r) {
  fs::create_directories(m.out_dir);

  nlohmann::ordered_json costs;
  costs["case"] = r.grid.name;
  costs["scenario"] = m.scenario;
  costs["epsilon"] = fmtg(m.epsilon);
  costs["balancing"] = m.balancing;
  costs["horizon"] = m.horizon;
  costs["status"] = to_string(r.solution.status);
  costs["objective"] = fmtg(r.solution.objective);
  costs["policy_vars"] = r.built.policy_var_count;
  costs["epigraph_vars"] = r.built.epigraph_var_count;
  costs["balance_residual"] = fmtg(r.solution.max_balance_residual);
  costs["iterations"] = r.solution.iterations;
  costs["solve_seconds"] = fmtg(r.solution.solve_seconds);
  costs["infeasibility_flags"] = r.solution.infeasibility_flags;
  {
    std::ofstream out(fs::path(m.out_dir) / "costs.json");
    out << costs.dump(1) << "\n";
  }

  if (r.solution.status != SolveStatus::optimal) return;

  {
    std::vector<ScheduleRow> rows;
    append_schedule_rows(rows, r);
    std::ofstream out(fs::path(m.out_dir) / "schedule.csv");
    out << "quantity,id,t,mean,std,lo,hi\n";
    const double lam = r.built.lambda;
    for (const ScheduleRow& row : rows) {
      out << row.quantity << ',' << row.id << ',' << row.t << ',' << fmtg(row.mean) << ','
          << fmtg(row.std) << ',' << fmtg(row.mean - lam * row.std) << ','
          << fmtg(row.mean + lam * row.std) << "\n";
    }
  }

  if (r.report) {
    std::ofstream out(fs::path(m.out_dir) / "validation.json");
    out << r.report->to_json() << "\n";
  }
}

GridCase derive_sweep_case(const GridCase& base, int n_d, int n_s, std::uint64_t seed) {
  if (n_d < 1 || n_d > static_cast<int>(base.loads.size())) {
    throw ValidationError("sweep: N_d must lie in 1.." + std::to_string(base.loads.size()));
  }

  // disturbances at the highest-load buses
  std::vector<FixedLoad> ranked = base.loads;
  std::sort(ranked.begin(), ranked.end(), [](const FixedLoad& a, const FixedLoad& b) {
    if (std::fabs(a.d_nom) != std::fabs(b.d_nom)) {
      return std::fabs(a.d_nom) > std::fabs(b.d_nom);
    }
    return a.bus < b.bus;
  });
  std::vector<int> dist_buses;
  for (int i = 0; i < n_d; ++i) dist_buses.push_back(ranked[i].bus);
  std::sort(dist_buses.begin(), dist_buses.end());

  // storages: keep existing ones first, then seeded placement
  std::vector<Storage> storages(base.storages.begin(),
                                base.storages.begin() +
                                    std::min<std::size_t>(n_s, base.storages.size()));
  if (n_s > static_cast<int>(base.storages.size())) {
    std::vector<int> taken;
    for (const Storage& s : storages) taken.push_back(s.bus);
    for (const Generator& g : base.generators) taken.push_back(g.bus);
    std::vector<int> candidates;
    for (int b : base.buses) {
      if (std::find(taken.begin(), taken.end(), b) == taken.end()) candidates.push_back(b);
    }
    std::uint64_t state = seed * 6364136223846793005ULL + 1442695040888963407ULL;
    const Storage prototype = base.storages.empty()
                                  ? Storage{0, 0.0, 6.0, -10.0, 10.0, 2.0, 0.0, 0.19, 0.21}
                                  : base.storages.front();
    while (static_cast<int>(storages.size()) < n_s && !candidates.empty()) {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      const std::size_t pick = (state >> 33) % candidates.size();
      Storage s = prototype;
      s.bus = candidates[pick];
      storages.push_back(s);
      candidates.erase(candidates.begin() + static_cast<long>(pick));
    }
    if (static_cast<int>(storages.size()) < n_s) {
      throw ValidationError("sweep: not enough free buses for the requested storages");
    }
  }

  nlohmann::ordered_json doc;
  doc["name"] = base.name + "_nd" + std::to_string(n_d) + "_ns" + std::to_string(n_s);
  doc["buses"] = base.buses;
  doc["lines"] = nlohmann::ordered_json::array();
  for (const Line& l : base.lines) {
    doc["lines"].push_back({{"id", l.id},
                            {"from", l.from},
                            {"to", l.to},
                            {"x", l.x},
                            {"p_line_max", l.p_line_max},
                            {"c_min", l.c_min},
                            {"c_max", l.c_max}});
  }
  doc["generators"] = nlohmann::ordered_json::array();
  for (const Generator& g : base.generators) {
    doc["generators"].push_back({{"bus", g.bus},
                                 {"u_min", g.u_min},
                                 {"u_max", g.u_max},
                                 {"du_min", g.du_min},
                                 {"du_max", g.du_max},
                                 {"gamma2", g.gamma2},
                                 {"gamma1", g.gamma1},
                                 {"gamma0", g.gamma0}});
  }
  doc["storages"] = nlohmann::ordered_json::array();
  for (const Storage& s : storages) {
    doc["storages"].push_back({{"bus", s.bus},
                               {"e_min", s.e_min},
                               {"e_max", s.e_max},
                               {"s_min", s.s_min},
                               {"s_max", s.s_max},
                               {"e_ic_mean", s.e_ic_mean},
                               {"e_ic_var", s.e_ic_var},
                               {"e_term_min", s.e_term_min},
                               {"e_term_max", s.e_term_max}});
  }
  doc["disturbances"] = nlohmann::ordered_json::array();
  for (int b : dist_buses) {
    doc["disturbances"].push_back({{"bus", b}, {"forecast", "artificial"}});
  }
  doc["loads"] = nlohmann::ordered_json::array();
  for (const FixedLoad& l : base.loads) {
    doc["loads"].push_back({{"bus", l.bus}, {"d_nom", l.d_nom}});
  }
  return parse_case(doc.dump(), doc["name"].get<std::string>());
}

std::vector<SweepRow> run_sweep(const RunManifest& m) {
  m.validate();
  const GridCase base = parse_case_file(m.case_path);

  std::vector<double> epsilons =
      m.sweep_epsilons.empty() ? std::vector<double>{m.epsilon} : m.sweep_epsilons;
  std::vector<std::string> balancings = m.sweep_balancings.empty()
                                            ? std::vector<std::string>{m.balancing}
                                            : m.sweep_balancings;

  struct Point {
    int nd, ns;
    std::string balancing;
    double eps;
  };
  std::vector<Point> points;
  for (const auto& [nd, ns] : m.sweep_points) {
    for (const auto& bal : balancings) {
      for (double e : epsilons) points.push_back({nd, ns, bal, e});
    }
  }
  std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) {
    return std::tie(a.nd, a.ns, a.balancing, a.eps) <
           std::tie(b.nd, b.ns, b.balancing, b.eps);
  });

  std::vector<SweepRow> rows(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) break;
      const Point& pt = points[i];
      SweepRow row;
      row.n_d = pt.nd;
      row.n_s = pt.ns;
      row.balancing = pt.balancing;
      row.epsilon = pt.eps;
      try {
        const GridCase variant = derive_sweep_case(base, pt.nd, pt.ns, m.seed);
        row.case_name = variant.name;
        RunManifest pm = m;
        pm.scenario = m.scenario;
        pm.epsilon = pt.eps;
        pm.balancing = pt.balancing;
        const std::map<int, Forecast> fc = resolve_forecasts(variant, pm);
        const BuildResult built = build(variant, fc, pm.to_config());
        row.policy_vars = built.policy_var_count;
        const PolicySolution sol = solve_scenario(built, variant);
        row.solve_seconds = sol.solve_seconds;
        row.objective = sol.objective;
        row.status = to_string(sol.status);
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
      rows[i] = std::move(row);
    }
  };
  const int n_threads = std::max(1, std::min<int>(m.jobs, static_cast<int>(points.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return rows;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  out << "case,n_d,n_s,balancing,epsilon,policy_vars,solve_seconds,objective,status\n";
  for (const SweepRow& r : rows) {
    out << r.case_name << ',' << r.n_d << ',' << r.n_s << ',' << r.balancing << ','
        << fmtg(r.epsilon) << ',' << r.policy_vars << ',' << fmtg(r.solve_seconds) << ','
        << fmtg(r.objective) << ',' << r.status << "\n";
  }
}

std::vector<std::string> fit_forecasts(const GridCase& grid, const RunManifest& m) {
  fs::create_directories(m.out_dir);
  const std::map<int, Forecast> forecasts = resolve_forecasts(grid, m);
  std::vector<std::string> paths;
  for (const auto& [bus, f] : forecasts) {
    const fs::path p = fs::path(m.out_dir) / ("forecast_bus" + std::to_string(bus) + ".json");
    std::ofstream out(p);
    out << forecast_to_json(f) << "\n";
    paths.push_back(p.string());
  }
  return paths;
}

int run_manifest(const RunManifest& m) {
  m.validate();
  if (m.fit_forecasts_only) {
    const GridCase grid = parse_case_file(m.case_path);
    const auto paths = fit_forecasts(grid, m);
    for (const auto& p : paths) std::printf("wrote %s\n", p.c_str());
    return 0;
  }
  if (m.sweep) {
    const auto rows = run_sweep(m);
    fs::create_directories(m.out_dir);
    write_sweep_csv((fs::path(m.out_dir) / "sweep.csv").string(), rows);
    std::printf("wrote %s (%zu rows)\n",
                (fs::path(m.out_dir) / "sweep.csv").string().c_str(), rows.size());
    return 0;
  }

  const ScenarioResult r = run_scenario(m);
  write_outputs(m, r);
  if (r.solution.status != SolveStatus::optimal) {
    std::fprintf(stderr, "solve status: %s\n", to_string(r.solution.status));
    for (const auto& flag : r.solution.infeasibility_flags) {
      std::fprintf(stderr, "diagnostic: %s\n", flag.c_str());
    }
    return 2;
  }
  std::printf("status optimal, objective %.6f, outputs in %s\n", r.solution.objective,
              m.out_dir.c_str());
  if (r.report && !r.report->all_pass()) {
    std::fprintf(stderr, "validation found mismatches; see validation.json\n");
    return 3;
  }
  return 0;
}

}  // namespace stochopf
