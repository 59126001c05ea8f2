#include "stochopf/moments.hpp"

#include <algorithm>
#include <cmath>

namespace stochopf {

// ------------------------------------------------------------------- LinExpr

void LinExpr::add_term(int id, double coeff) {
  if (coeff == 0.0) return;
  auto it = std::lower_bound(terms.begin(), terms.end(), id,
                             [](const auto& p, int v) { return p.first < v; });
  if (it != terms.end() && it->first == id) {
    it->second += coeff;
    if (it->second == 0.0) terms.erase(it);
  } else {
    terms.insert(it, {id, coeff});
  }
}

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  constant += o.constant;
  for (const auto& [id, c] : o.terms) add_term(id, c);
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) {
  constant -= o.constant;
  for (const auto& [id, c] : o.terms) add_term(id, -c);
  return *this;
}

LinExpr& LinExpr::operator*=(double f) {
  if (f == 0.0) {
    constant = 0.0;
    terms.clear();
    return *this;
  }
  constant *= f;
  for (auto& [id, c] : terms) c *= f;
  return *this;
}

// ----------------------------------------------------------------- GermIndex

GermIndex::GermIndex(std::vector<int> disturbance_buses, int horizon,
                     std::vector<int> ic_storage_buses)
    : disturbance_buses_(std::move(disturbance_buses)),
      ic_storage_buses_(std::move(ic_storage_buses)),
      horizon_(horizon) {
  if (horizon_ < 1) throw ValidationError("germ horizon must be >= 1");
  if (!std::is_sorted(disturbance_buses_.begin(), disturbance_buses_.end())) {
    std::sort(disturbance_buses_.begin(), disturbance_buses_.end());
  }
  std::sort(ic_storage_buses_.begin(), ic_storage_buses_.end());
  dim_ = static_cast<int>(disturbance_buses_.size()) * horizon_ +
         static_cast<int>(ic_storage_buses_.size());
}

int GermIndex::bus_slot(int bus) const {
  auto it = std::lower_bound(disturbance_buses_.begin(), disturbance_buses_.end(), bus);
  if (it == disturbance_buses_.end() || *it != bus) {
    throw ValidationError("bus " + std::to_string(bus) + " is not a disturbance bus");
  }
  return static_cast<int>(it - disturbance_buses_.begin());
}

int GermIndex::coord(int bus, int k) const {
  if (k < 1 || k > horizon_) throw ValidationError("germ time index out of range");
  return bus_slot(bus) * horizon_ + (k - 1);
}

int GermIndex::ic_coord(int storage_bus) const {
  auto it = std::lower_bound(ic_storage_buses_.begin(), ic_storage_buses_.end(), storage_bus);
  if (it == ic_storage_buses_.end() || *it != storage_bus) {
    throw ValidationError("storage bus " + std::to_string(storage_bus) +
                          " has no initial-condition germ");
  }
  return static_cast<int>(disturbance_buses_.size()) * horizon_ +
         static_cast<int>(it - ic_storage_buses_.begin());
}

GermIndex::CoordInfo GermIndex::info(int coord) const {
  const int nd = static_cast<int>(disturbance_buses_.size());
  if (coord < 0 || coord >= dim_) throw ValidationError("germ coordinate out of range");
  if (coord < nd * horizon_) {
    return {false, disturbance_buses_[coord / horizon_], coord % horizon_ + 1};
  }
  return {true, ic_storage_buses_[coord - nd * horizon_], 0};
}

// ---------------------------------------------------------------- PolicyVars

namespace {
inline int tri_index(int t, int k) {  // 1-based, k <= t
  return (t - 1) * t / 2 + (k - 1);
}
}  // namespace

PolicyVars::PolicyVars(const std::vector<int>& generator_buses,
                       const std::vector<int>& storage_buses,
                       const std::vector<int>& disturbance_buses, int horizon,
                       Balancing balancing, int first_var_id)
    : disturbance_buses_(disturbance_buses),
      horizon_(horizon),
      balancing_(balancing),
      first_var_id_(first_var_id) {
  if (horizon_ < 1) throw ValidationError("policy horizon must be >= 1");
  std::sort(disturbance_buses_.begin(), disturbance_buses_.end());

  const int tri = horizon_ * (horizon_ + 1) / 2;
  const int n_mats =
      balancing_ == Balancing::local ? static_cast<int>(disturbance_buses_.size()) : 1;

  int next = first_var_id;
  auto add_device = [&](int bus, bool is_storage) {
    Device d;
    d.bus = bus;
    d.is_storage = is_storage;
    d.mean_base = next;
    next += horizon_;
    for (int j = 0; j < n_mats; ++j) {
      d.matrix_base.push_back(next);
      next += tri;
    }
    devices_.push_back(std::move(d));
  };

  std::vector<int> gens = generator_buses;
  std::sort(gens.begin(), gens.end());
  for (int b : gens) add_device(b, false);
  std::vector<int> stos = storage_buses;
  std::sort(stos.begin(), stos.end());
  for (int b : stos) add_device(b, true);

  num_vars_ = next - first_var_id;
}

const PolicyVars::Device* PolicyVars::device_at_bus(int bus) const {
  for (const Device& d : devices_) {
    if (d.bus == bus) return &d;
  }
  return nullptr;
}

int PolicyVars::mean_var(const Device& d, int t) const {
  if (t < 1 || t > horizon_) throw ValidationError("mean schedule index out of range");
  return d.mean_base + (t - 1);
}

int PolicyVars::matrix_var(const Device& d, int j_slot, int t, int k) const {
  if (t < 1 || t > horizon_ || k < 1 || k > t) {
    throw ValidationError("response matrix index out of range (lower triangle only)");
  }
  const int slot = balancing_ == Balancing::local ? j_slot : 0;
  return d.matrix_base.at(slot) + tri_index(t, k);
}

long long PolicyVars::count_decision_vars(Balancing mode, long long n_u, long long n_s,
                                          long long n_d, long long horizon) {
  const long long tri = horizon * (horizon + 1) / 2;
  const long long per_device = mode == Balancing::local ? horizon + n_d * tri : horizon + tri;
  return (n_u + n_s) * per_device;
}

// ---------------------------------------------------------------- AffineForm

void AffineForm::add_coeff(int coord, LinExpr e) {
  if (e.is_zero()) return;
  auto it = std::lower_bound(coeffs.begin(), coeffs.end(), coord,
                             [](const auto& p, int v) { return p.first < v; });
  if (it != coeffs.end() && it->first == coord) {
    it->second += e;
    if (it->second.is_zero()) coeffs.erase(it);
  } else {
    coeffs.insert(it, {coord, std::move(e)});
  }
}

const LinExpr* AffineForm::find_coeff(int coord) const {
  auto it = std::lower_bound(coeffs.begin(), coeffs.end(), coord,
                             [](const auto& p, int v) { return p.first < v; });
  return it != coeffs.end() && it->first == coord ? &it->second : nullptr;
}

AffineForm& AffineForm::operator+=(const AffineForm& o) {
  mean += o.mean;
  for (const auto& [coord, e] : o.coeffs) add_coeff(coord, e);
  return *this;
}

AffineForm& AffineForm::operator*=(double f) {
  mean *= f;
  if (f == 0.0) {
    coeffs.clear();
    return *this;
  }
  for (auto& [coord, e] : coeffs) e *= f;
  return *this;
}

bool AffineForm::deterministic() const {
  for (const auto& [coord, e] : coeffs) {
    if (!e.is_zero()) return false;
  }
  return true;
}

double NumericForm::variance() const {
  double v = 0.0;
  for (const auto& [coord, c] : coeffs) v += c * c;
  return v;
}

double NumericForm::std_dev() const { return std::sqrt(variance()); }

double NumericForm::realize(const double* germ) const {
  double v = mean;
  for (const auto& [coord, c] : coeffs) v += c * germ[coord];
  return v;
}

NumericForm evaluate(const AffineForm& form, const Eigen::VectorXd& x) {
  NumericForm n;
  n.mean = form.mean.eval(x);
  n.coeffs.reserve(form.coeffs.size());
  for (const auto& [coord, e] : form.coeffs) {
    const double c = e.eval(x);
    if (c != 0.0) n.coeffs.emplace_back(coord, c);
  }
  return n;
}

// ------------------------------------------------------------------ builders

AffineForm disturbance_form(const Forecast& f, int bus, int t, const GermIndex& germ) {
  if (t < 1 || t > f.horizon) throw ValidationError("disturbance form time out of range");
  AffineForm a;
  a.mean = LinExpr(f.mean(t - 1));
  if (f.deterministic()) return a;
  for (int k = 1; k <= t; ++k) {
    const double l = f.factor(t - 1, k - 1);
    if (l != 0.0) a.add_coeff(germ.coord(bus, k), LinExpr(l));
  }
  return a;
}

AffineForm generation_form(const PolicyVars& pv, const PolicyVars::Device& d, int t,
                           const GermIndex& germ) {
  AffineForm a;
  a.mean = LinExpr::variable(pv.mean_var(d, t));
  const auto& dist = pv.disturbance_buses();
  for (int j = 0; j < static_cast<int>(dist.size()); ++j) {
    for (int k = 1; k <= t; ++k) {
      a.add_coeff(germ.coord(dist[j], k), LinExpr::variable(pv.matrix_var(d, j, t, k)));
    }
  }
  return a;
}

AffineForm storage_injection_form(const PolicyVars& pv, const PolicyVars::Device& d, int t,
                                  const GermIndex& germ) {
  // structurally identical to the generation policy
  return generation_form(pv, d, t, germ);
}

AffineForm storage_state_form(const PolicyVars& pv, const PolicyVars::Device& d,
                              int state_time, double h, double e_ic_mean, double e_ic_var,
                              const GermIndex& germ) {
  if (h <= 0.0) throw ValidationError("storage step h must be > 0");
  if (state_time < 1 || state_time > pv.horizon() + 1) {
    throw ValidationError("storage state time out of range");
  }
  AffineForm a;
  a.mean = LinExpr(e_ic_mean);
  if (e_ic_var > 0.0) {
    a.add_coeff(germ.ic_coord(d.bus), LinExpr(std::sqrt(e_ic_var)));
  }
  const int t = state_time - 1;  // accumulate injections s(1..t)
  for (int k = 1; k <= t; ++k) {
    a.mean.add_term(pv.mean_var(d, k), -h);
  }
  const auto& dist = pv.disturbance_buses();
  for (int j = 0; j < static_cast<int>(dist.size()); ++j) {
    for (int k = 1; k <= t; ++k) {
      LinExpr e;
      for (int l = k; l <= t; ++l) {
        e.add_term(pv.matrix_var(d, j, l, k), -h);
      }
      a.add_coeff(germ.coord(dist[j], k), std::move(e));
    }
  }
  return a;
}

AffineForm ramp_form(const PolicyVars& pv, const PolicyVars::Device& d, int tau,
                     const GermIndex& germ) {
  if (tau < 2 || tau > pv.horizon()) throw ValidationError("ramp index requires 2 <= tau <= T");
  AffineForm a;
  a.mean = LinExpr::variable(pv.mean_var(d, tau));
  a.mean.add_term(pv.mean_var(d, tau - 1), -1.0);
  const auto& dist = pv.disturbance_buses();
  for (int j = 0; j < static_cast<int>(dist.size()); ++j) {
    a.add_coeff(germ.coord(dist[j], tau),
                LinExpr::variable(pv.matrix_var(d, j, tau, tau)));
    for (int k = 1; k <= tau - 1; ++k) {
      LinExpr e = LinExpr::variable(pv.matrix_var(d, j, tau, k));
      e.add_term(pv.matrix_var(d, j, tau - 1, k), -1.0);
      a.add_coeff(germ.coord(dist[j], k), std::move(e));
    }
  }
  return a;
}

AffineForm net_power_form(const GridCase& grid, const std::map<int, Forecast>& forecasts,
                          const PolicyVars& pv, const GermIndex& germ, int bus, int t) {
  AffineForm a;
  auto fit = forecasts.find(bus);
  if (fit != forecasts.end()) {
    a += disturbance_form(fit->second, bus, t, germ);
  }
  if (const PolicyVars::Device* d = pv.device_at_bus(bus)) {
    a += d->is_storage ? storage_injection_form(pv, *d, t, germ)
                       : generation_form(pv, *d, t, germ);
  }
  return a;
}

AffineForm line_flow_form(const Eigen::MatrixXd& phi, int line_index,
                          const std::vector<AffineForm>& nodal_forms) {
  if (static_cast<int>(nodal_forms.size()) != phi.cols()) {
    throw ValidationError("line_flow_form requires one nodal form per bus");
  }
  AffineForm a;
  for (int i = 0; i < phi.cols(); ++i) {
    const double w = phi(line_index, i);
    if (w == 0.0) continue;
    AffineForm scaled = nodal_forms[i];
    scaled *= w;
    a += scaled;
  }
  return a;
}

}  // namespace stochopf
