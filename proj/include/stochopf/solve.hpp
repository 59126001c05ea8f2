#pragma once

#include <string>
#include <vector>

#include "stochopf/conic_solver.hpp"
#include "stochopf/socp.hpp"

namespace stochopf {

enum class SolveStatus { optimal, infeasible, unbounded, numerical_failure };

const char* to_string(SolveStatus s);

struct SolveOptions {
  double feastol = 1e-8;
  double reltol = 1e-8;
  int max_iters = 200;
  bool verbose = false;
};

/// Honors STOCHOPF_SOLVER_TOL when set.
SolveOptions solve_options_from_env();

/// Standard conic form min c'x s.t. Ax = b, Gx + s = h, s in K.
struct StandardForm {
  Eigen::SparseMatrix<double> G, A;
  Eigen::VectorXd c, h, b;
  int n_orthant = 0;
  std::vector<int> soc_dims;
  double objective_constant = 0.0;
};

StandardForm to_standard_form(const ConicProgram& p);

/// Optimal policy parameters. Response matrices are lower-triangular
/// with one entry per disturbance bus (identical objects under global
/// balancing).
struct PolicySolution {
  struct DevicePolicy {
    int bus = 0;
    bool is_storage = false;
    Eigen::VectorXd mean;                   // length T
    std::vector<Eigen::MatrixXd> response;  // T x T per disturbance bus
  };

  SolveStatus status = SolveStatus::numerical_failure;
  double objective = 0.0;
  std::vector<DevicePolicy> devices;
  Eigen::VectorXd raw_x;  // full variable vector, balance-projected
  double solve_seconds = 0.0;
  int iterations = 0;
  double max_balance_residual = 0.0;
  double duality_gap = 0.0;
  std::vector<std::string> infeasibility_flags;

  const DevicePolicy* device_at(int bus) const;
};

/// Pre-solve screening per the known non-convergence patterns: demand
/// above total capacity and ramp requirements above ramp limits.
std::vector<std::string> diagnose_infeasibility(const GridCase& grid,
                                                const std::map<int, Forecast>& forecasts,
                                                const ScenarioConfig& config);

/// Solve a built scenario and extract policies. Balance residuals are
/// projected out of the extracted parameters (the perturbation is within
/// solver tolerance), so realized policies balance to machine precision.
PolicySolution solve_scenario(const BuildResult& built, const GridCase& grid,
                              const SolveOptions& options = solve_options_from_env());

}  // namespace stochopf
