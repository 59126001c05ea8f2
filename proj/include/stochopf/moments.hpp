#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stochopf/forecast.hpp"
#include "stochopf/linexpr.hpp"
#include "stochopf/netcase.hpp"

namespace stochopf {

/// Dense coordinates for the stochastic germ: one standard normal per
/// (disturbance bus, time step), bus-major and time-minor, plus one
/// trailing coordinate per storage with uncertain initial energy.
class GermIndex {
 public:
  GermIndex() = default;
  GermIndex(std::vector<int> disturbance_buses, int horizon,
            std::vector<int> ic_storage_buses = {});

  int dimension() const { return dim_; }
  int horizon() const { return horizon_; }
  const std::vector<int>& disturbance_buses() const { return disturbance_buses_; }

  /// Coordinate of germ component (bus j, time k), k in 1..T.
  int coord(int bus, int k) const;
  /// Coordinate of the initial-condition germ of a storage bus.
  int ic_coord(int storage_bus) const;
  int bus_slot(int bus) const;  // 0-based position of a disturbance bus

  struct CoordInfo {
    bool is_ic = false;
    int bus = 0;
    int k = 0;  // 1-based time, 0 for ic coordinates
  };
  CoordInfo info(int coord) const;

 private:
  std::vector<int> disturbance_buses_;
  std::vector<int> ic_storage_buses_;
  int horizon_ = 0;
  int dim_ = 0;
};

enum class Balancing { local, global };

/// Decision-variable layout of the affine policies: per device a mean
/// schedule of length T plus lower-triangular response matrices, one per
/// disturbance under local balancing, a single shared one under global.
/// Entries above the diagonal are the constant zero, never variables.
class PolicyVars {
 public:
  struct Device {
    int bus = 0;
    bool is_storage = false;
    int mean_base = 0;
    std::vector<int> matrix_base;  // one entry per disturbance slot (or one, global)
  };

  PolicyVars() = default;
  PolicyVars(const std::vector<int>& generator_buses, const std::vector<int>& storage_buses,
             const std::vector<int>& disturbance_buses, int horizon, Balancing balancing,
             int first_var_id = 0);

  int num_vars() const { return num_vars_; }
  int first_var_id() const { return first_var_id_; }
  int horizon() const { return horizon_; }
  Balancing balancing() const { return balancing_; }
  const std::vector<Device>& devices() const { return devices_; }
  const std::vector<int>& disturbance_buses() const { return disturbance_buses_; }

  const Device* device_at_bus(int bus) const;

  /// Variable id of the mean schedule entry at time t (1-based).
  int mean_var(const Device& d, int t) const;
  /// Variable id of the response-matrix entry (t, k), k <= t, for the
  /// disturbance in slot j (ignored under global balancing).
  int matrix_var(const Device& d, int j_slot, int t, int k) const;

  /// Closed-form count of free policy scalars.
  static long long count_decision_vars(Balancing mode, long long n_u, long long n_s,
                                       long long n_d, long long horizon);

 private:
  std::vector<Device> devices_;
  std::vector<int> disturbance_buses_;
  int horizon_ = 0;
  Balancing balancing_ = Balancing::local;
  int first_var_id_ = 0;
  int num_vars_ = 0;
};

/// A Gaussian quantity as mean plus germ coefficients, both affine in
/// the decision variables. Closed under addition and scaling.
struct AffineForm {
  LinExpr mean;
  std::vector<std::pair<int, LinExpr>> coeffs;  // sorted by germ coordinate

  void add_coeff(int coord, LinExpr e);
  const LinExpr* find_coeff(int coord) const;

  AffineForm& operator+=(const AffineForm& o);
  AffineForm& operator*=(double f);
  friend AffineForm operator+(AffineForm a, const AffineForm& b) { return a += b; }
  friend AffineForm operator*(double f, AffineForm a) { return a *= f; }

  bool deterministic() const;
};

/// Mean and germ coefficients with decision variables fixed to x.
struct NumericForm {
  double mean = 0.0;
  std::vector<std::pair<int, double>> coeffs;

  double variance() const;
  double std_dev() const;
  /// mean + sum_k coeff_k * germ_k
  double realize(const double* germ) const;
};

NumericForm evaluate(const AffineForm& form, const Eigen::VectorXd& x);

// ------------------------------------------------------------------ builders

AffineForm disturbance_form(const Forecast& f, int bus, int t, const GermIndex& germ);

AffineForm generation_form(const PolicyVars& pv, const PolicyVars::Device& d, int t,
                           const GermIndex& germ);

AffineForm storage_injection_form(const PolicyVars& pv, const PolicyVars::Device& d, int t,
                                  const GermIndex& germ);

/// Storage energy at state_time in 1..T+1 (state_time 1 is the initial
/// condition itself); h is the discretization step.
AffineForm storage_state_form(const PolicyVars& pv, const PolicyVars::Device& d,
                              int state_time, double h, double e_ic_mean, double e_ic_var,
                              const GermIndex& germ);

AffineForm ramp_form(const PolicyVars& pv, const PolicyVars::Device& d, int tau,
                     const GermIndex& germ);

/// Nodal net power d + u + s at (bus, t); absent devices contribute zero.
AffineForm net_power_form(const GridCase& grid, const std::map<int, Forecast>& forecasts,
                          const PolicyVars& pv, const GermIndex& germ, int bus, int t);

AffineForm line_flow_form(const Eigen::MatrixXd& phi, int line_index,
                          const std::vector<AffineForm>& nodal_forms);

}  // namespace stochopf
