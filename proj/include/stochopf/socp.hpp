#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stochopf/moments.hpp"

namespace stochopf {

struct BuildError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Experiment configuration: scenario S1 disables storage, S3 adds a
/// standard-deviation cap on generator outputs.
struct ScenarioConfig {
  bool storage_enabled = true;
  std::optional<double> variance_cap;  // sigma bound on generator outputs (S3)
  double epsilon = 0.05;
  Balancing balancing = Balancing::local;
  int horizon = 24;
  double h = 1.0;
  // Terminal band read as absolute energy by default; the switch treats
  // it as a fraction of e_max instead.
  bool terminal_band_fraction = false;

  void validate() const;
  std::string scenario_name() const;
};

/// Finite conic program: linear objective over free scalars (quadratic
/// pieces epigraphed through rotated cones), linear constraints, and
/// second-order cone constraints.
struct ConicProgram {
  int num_vars = 0;
  std::vector<std::string> var_names;
  LinExpr objective;  // minimized; constant carries the fixed cost part

  std::vector<LinExpr> eq;    // expr == 0
  std::vector<LinExpr> ineq;  // expr <= 0

  struct Soc {
    std::vector<LinExpr> norm_args;  // ||args||_2 <= bound
    LinExpr bound;
  };
  std::vector<Soc> socs;

  struct Rsoc {
    LinExpr u, v;  // 2 u v >= ||w||^2, u >= 0, v >= 0
    std::vector<LinExpr> w;
  };
  std::vector<Rsoc> rsocs;

  int new_var(const std::string& name);

  /// Deterministic JSON dump for golden-file tests (byte stable).
  std::string debug_dump() const;
};

/// Standard normal quantile of 1 - epsilon, |Psi(lambda)-(1-eps)| <= 1e-10.
double lambda_of_epsilon(double epsilon);
/// Standard normal CDF.
double std_normal_cdf(double x);

/// Two cones: lambda ||coeffs|| <= upper - mean and <= mean - lower.
/// Deterministic forms reduce to linear rows. Bounds may be one-sided.
void add_chance_constraint(ConicProgram& p, const AffineForm& form,
                           std::optional<double> lower, std::optional<double> upper,
                           double epsilon);

/// ||coeffs|| <= sigma_max.
void add_std_cap(ConicProgram& p, const AffineForm& form, double sigma_max);

/// Power balance: T mean equalities plus one equality per germ
/// coordinate and lower-triangular position.
void add_balance(ConicProgram& p, const PolicyVars& pv,
                 const std::map<int, Forecast>& forecasts, const GridCase& grid,
                 const GermIndex& germ);

/// Expected quadratic generation cost via rotated-cone epigraphs.
void add_objective(ConicProgram& p, const GridCase& grid, const PolicyVars& pv,
                   const GermIndex& germ);

/// Chance constraints on storage energy (capacity band per step, the
/// terminal band at e(T)) and on the injection band.
void add_storage_constraints(ConicProgram& p, const GridCase& grid, const PolicyVars& pv,
                             const GermIndex& germ, const ScenarioConfig& config);

struct BuildResult {
  ConicProgram program;
  PolicyVars policy;
  GermIndex germ;
  Ptdf ptdf;
  // forecasts for every bus with nonzero nominal power, fixed loads
  // included as deterministic profiles
  std::map<int, Forecast> forecasts;
  ScenarioConfig config;
  double lambda = 0.0;
  int policy_var_count = 0;
  int epigraph_var_count = 0;
};

/// Assemble the scenario program. `forecasts` must cover every
/// disturbance bus of the case; fixed loads get deterministic
/// artificial profiles internally.
BuildResult build(const GridCase& grid, const std::map<int, Forecast>& forecasts,
                  const ScenarioConfig& config);

}  // namespace stochopf
