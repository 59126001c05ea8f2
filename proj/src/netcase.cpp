#include "stochopf/netcase.hpp"

#include <algorithm>
#include <limits>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace stochopf {

using nlohmann::json;

int GridCase::bus_index(int bus) const {
  auto it = index_of_.find(bus);
  if (it == index_of_.end()) {
    throw ValidationError("unknown bus id " + std::to_string(bus));
  }
  return it->second;
}

namespace {

double require_number(const json& obj, const char* field, const std::string& ctx) {
  if (!obj.contains(field) || !obj[field].is_number()) {
    throw ParseError(ctx + ": missing or non-numeric field '" + field + "'");
  }
  return obj[field].get<double>();
}

int require_int(const json& obj, const char* field, const std::string& ctx) {
  if (!obj.contains(field) || !obj[field].is_number_integer()) {
    throw ParseError(ctx + ": missing or non-integer field '" + field + "'");
  }
  return obj[field].get<int>();
}

void check_band(double lo, double hi, const std::string& what) {
  if (lo > hi) {
    std::ostringstream os;
    os << what << ": lower bound " << lo << " exceeds upper bound " << hi;
    throw ValidationError(os.str());
  }
}

void check_connected(const GridCase& c) {
  const int n = c.num_buses();
  if (n == 0) throw ValidationError("case has no buses");
  std::vector<std::vector<int>> adj(n);
  for (const Line& l : c.lines) {
    const int a = c.bus_index(l.from);
    const int b = c.bus_index(l.to);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<bool> seen(n, false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int reached = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        q.push(v);
      }
    }
  }
  if (reached != n) {
    throw ValidationError("grid graph is not connected (" + std::to_string(reached) +
                          " of " + std::to_string(n) + " buses reachable)");
  }
}

}  // namespace

GridCase parse_case(const std::string& json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": invalid JSON: " + e.what());
  }

  GridCase c;
  c.name = doc.value("name", origin);

  if (!doc.contains("buses") || !doc["buses"].is_array() || doc["buses"].empty()) {
    throw ParseError(origin + ": missing or empty field 'buses'");
  }
  for (const auto& b : doc["buses"]) {
    if (!b.is_number_integer()) throw ParseError(origin + ": non-integer bus id in 'buses'");
    c.buses.push_back(b.get<int>());
  }
  std::sort(c.buses.begin(), c.buses.end());
  if (std::adjacent_find(c.buses.begin(), c.buses.end()) != c.buses.end()) {
    throw ValidationError(origin + ": duplicate bus id");
  }
  for (int i = 0; i < static_cast<int>(c.buses.size()); ++i) {
    c.index_of_[c.buses[i]] = i;
  }

  if (!doc.contains("lines") || !doc["lines"].is_array()) {
    throw ParseError(origin + ": missing field 'lines'");
  }
  for (const auto& jl : doc["lines"]) {
    Line l;
    const std::string ctx = origin + " line";
    l.id = require_int(jl, "id", ctx);
    l.from = require_int(jl, "from", ctx);
    l.to = require_int(jl, "to", ctx);
    l.x = require_number(jl, "x", ctx);
    l.p_line_max = require_number(jl, "p_line_max", ctx);
    if (l.x <= 0.0) {
      throw ValidationError(ctx + " " + std::to_string(l.id) + ": reactance must be > 0");
    }
    // Flow band defaults to 85% of the rating; a zero rating means the
    // line is unconstrained (stock case-file convention).
    if (l.p_line_max == 0.0 && !jl.contains("c_max") && !jl.contains("c_min")) {
      l.c_max = std::numeric_limits<double>::infinity();
      l.c_min = -std::numeric_limits<double>::infinity();
    } else {
      l.c_max = jl.contains("c_max") ? jl["c_max"].get<double>() : 0.85 * l.p_line_max;
      l.c_min = jl.contains("c_min") ? jl["c_min"].get<double>() : -0.85 * l.p_line_max;
    }
    check_band(l.c_min, l.c_max, ctx + " " + std::to_string(l.id) + " flow band");
    c.bus_index(l.from);  // throws on unknown bus
    c.bus_index(l.to);
    c.lines.push_back(l);
  }
  std::sort(c.lines.begin(), c.lines.end(),
            [](const Line& a, const Line& b) { return a.id < b.id; });

  std::set<int> gen_buses, sto_buses;
  for (const auto& jg : doc.value("generators", json::array())) {
    Generator g;
    const std::string ctx = origin + " generator";
    g.bus = require_int(jg, "bus", ctx);
    c.bus_index(g.bus);
    g.u_min = require_number(jg, "u_min", ctx);
    g.u_max = require_number(jg, "u_max", ctx);
    if (jg.contains("ramp_frac")) {
      const double r = jg["ramp_frac"].get<double>() * g.u_max;
      g.du_min = -r;
      g.du_max = r;
    } else {
      g.du_min = require_number(jg, "du_min", ctx);
      g.du_max = require_number(jg, "du_max", ctx);
    }
    g.gamma2 = require_number(jg, "gamma2", ctx);
    g.gamma1 = require_number(jg, "gamma1", ctx);
    g.gamma0 = require_number(jg, "gamma0", ctx);
    check_band(g.u_min, g.u_max, ctx + " at bus " + std::to_string(g.bus) + " output band");
    check_band(g.du_min, g.du_max, ctx + " at bus " + std::to_string(g.bus) + " ramp band");
    if (!gen_buses.insert(g.bus).second) {
      throw ValidationError(origin + ": more than one generator at bus " + std::to_string(g.bus));
    }
    c.generators.push_back(g);
  }
  std::sort(c.generators.begin(), c.generators.end(),
            [](const Generator& a, const Generator& b) { return a.bus < b.bus; });

  for (const auto& js : doc.value("storages", json::array())) {
    Storage s;
    const std::string ctx = origin + " storage";
    s.bus = require_int(js, "bus", ctx);
    c.bus_index(s.bus);
    s.e_min = require_number(js, "e_min", ctx);
    s.e_max = require_number(js, "e_max", ctx);
    s.s_min = require_number(js, "s_min", ctx);
    s.s_max = require_number(js, "s_max", ctx);
    s.e_ic_mean = require_number(js, "e_ic_mean", ctx);
    s.e_ic_var = js.value("e_ic_var", 0.0);
    s.e_term_min = require_number(js, "e_term_min", ctx);
    s.e_term_max = require_number(js, "e_term_max", ctx);
    check_band(s.e_min, s.e_max, ctx + " at bus " + std::to_string(s.bus) + " energy band");
    check_band(s.s_min, s.s_max, ctx + " at bus " + std::to_string(s.bus) + " injection band");
    check_band(s.e_term_min, s.e_term_max,
               ctx + " at bus " + std::to_string(s.bus) + " terminal band");
    if (s.e_ic_var < 0.0) {
      throw ValidationError(ctx + " at bus " + std::to_string(s.bus) + ": e_ic_var < 0");
    }
    if (!sto_buses.insert(s.bus).second) {
      throw ValidationError(origin + ": more than one storage at bus " + std::to_string(s.bus));
    }
    if (gen_buses.count(s.bus)) {
      throw ValidationError(origin + ": bus " + std::to_string(s.bus) +
                            " hosts both a generator and a storage");
    }
    c.storages.push_back(s);
  }
  std::sort(c.storages.begin(), c.storages.end(),
            [](const Storage& a, const Storage& b) { return a.bus < b.bus; });

  std::set<int> dist_buses;
  for (const auto& jd : doc.value("disturbances", json::array())) {
    DisturbanceRef d;
    const std::string ctx = origin + " disturbance";
    d.bus = require_int(jd, "bus", ctx);
    c.bus_index(d.bus);
    if (!jd.contains("forecast") || !jd["forecast"].is_string()) {
      throw ParseError(ctx + " at bus " + std::to_string(d.bus) + ": missing field 'forecast'");
    }
    d.forecast = jd["forecast"].get<std::string>();
    if (!dist_buses.insert(d.bus).second) {
      throw ValidationError(origin + ": duplicate disturbance at bus " + std::to_string(d.bus));
    }
    c.disturbances.push_back(d);
  }
  std::sort(c.disturbances.begin(), c.disturbances.end(),
            [](const DisturbanceRef& a, const DisturbanceRef& b) { return a.bus < b.bus; });

  for (const auto& jl : doc.value("loads", json::array())) {
    FixedLoad f;
    const std::string ctx = origin + " load";
    f.bus = require_int(jl, "bus", ctx);
    c.bus_index(f.bus);
    f.d_nom = require_number(jl, "d_nom", ctx);
    c.loads.push_back(f);
  }
  std::sort(c.loads.begin(), c.loads.end(),
            [](const FixedLoad& a, const FixedLoad& b) { return a.bus < b.bus; });

  check_connected(c);
  return c;
}

GridCase parse_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open case file: " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_case(buf.str(), path);
}

Ptdf compute_ptdf(const GridCase& grid, int reference_bus) {
  const int n = grid.num_buses();
  const int nl = static_cast<int>(grid.lines.size());
  const int ref = grid.bus_index(reference_bus);

  // Weighted Laplacian B = K diag(1/x) K^T from the line incidence.
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (const Line& l : grid.lines) {
    const int a = grid.bus_index(l.from);
    const int b = grid.bus_index(l.to);
    const double w = 1.0 / l.x;
    B(a, a) += w;
    B(b, b) += w;
    B(a, b) -= w;
    B(b, a) -= w;
  }

  // Reduce by the reference bus and solve for angle sensitivities.
  std::vector<int> keep;
  keep.reserve(n - 1);
  for (int i = 0; i < n; ++i) {
    if (i != ref) keep.push_back(i);
  }
  Eigen::MatrixXd Bred(n - 1, n - 1);
  for (int r = 0; r < n - 1; ++r) {
    for (int s = 0; s < n - 1; ++s) {
      Bred(r, s) = B(keep[r], keep[s]);
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Bred);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("singular reduced Laplacian; grid graph disconnected?");
  }
  // theta_red = Bred^{-1} p_red, columnwise for unit injections
  const Eigen::MatrixXd Binv = ldlt.solve(Eigen::MatrixXd::Identity(n - 1, n - 1));
  const double cond_check = (Bred * Binv - Eigen::MatrixXd::Identity(n - 1, n - 1))
                                .cwiseAbs()
                                .maxCoeff();
  if (!std::isfinite(cond_check) || cond_check > 1e-6) {
    throw NumericalError("reduced Laplacian solve failed; grid graph disconnected?");
  }

  std::vector<int> reduced_row(n, -1);
  for (int r = 0; r < n - 1; ++r) {
    reduced_row[keep[r]] = r;
  }

  Ptdf out;
  out.reference_bus = reference_bus;
  out.phi = Eigen::MatrixXd::Zero(nl, n);
  for (int li = 0; li < nl; ++li) {
    const Line& l = grid.lines[li];
    const int ra = reduced_row[grid.bus_index(l.from)];
    const int rb = reduced_row[grid.bus_index(l.to)];
    for (int s = 0; s < n - 1; ++s) {
      const double theta_a = ra >= 0 ? Binv(ra, s) : 0.0;
      const double theta_b = rb >= 0 ? Binv(rb, s) : 0.0;
      out.phi(li, keep[s]) = (theta_a - theta_b) / l.x;
    }
  }
  return out;
}

Ptdf compute_ptdf(const GridCase& grid) {
  const int ref = grid.generators.empty() ? grid.buses.front() : grid.generators.front().bus;
  return compute_ptdf(grid, ref);
}

}  // namespace stochopf
