#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stochopf/solve.hpp"

namespace stochopf {

/// One standard normal per (seed, coordinate index); Philox4x32-10
/// counter-based generator with a Box-Muller transform, so draws are
/// independent of evaluation order and parallel schedule.
double counter_normal(std::uint64_t seed, std::uint64_t index);

/// Germ draws stored coordinate-major: row(c) is a contiguous vector of
/// n samples for germ coordinate c.
struct SampleBatch {
  int n = 0;
  std::uint64_t seed = 0;
  int dimension = 0;
  std::vector<double> data;

  const double* row(int coord) const { return data.data() + static_cast<std::size_t>(coord) * n; }
  double at(int coord, int sample) const { return row(coord)[sample]; }
};

SampleBatch sample_germ(int n, std::uint64_t seed, int dimension);

/// Realize a fixed-policy quantity across all samples: out[s] = mean +
/// sum_k coeff_k germ_k[s]. Uses the SIMD kernels.
void realize_into(const NumericForm& form, const SampleBatch& batch, double* out);

struct ConstraintCheck {
  std::string quantity;
  int id = 0;  // bus or line id
  int t = 0;
  std::string side;  // "upper" or "lower"
  double bound = 0.0;
  double analytic_prob = 0.0;  // violation probability from the moments
  double empirical_rate = 0.0;
  double stderr_est = 0.0;  // binomial standard error
  bool pass = false;
};

struct MomentCheck {
  std::string quantity;
  int id = 0;
  int t = 0;
  double analytic_mean = 0.0;
  double analytic_var = 0.0;
  double sample_mean = 0.0;
  double sample_var = 0.0;
  bool mean_pass = false;
  bool var_pass = false;
};

struct ValidationReport {
  int samples = 0;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  double max_balance_residual = 0.0;       // per-sample sum of net powers
  double max_storage_path_mismatch = 0.0;  // closed form vs stepped dynamics
  double max_telescoping_residual = 0.0;   // e(T+1) - e(1) + h sum s
  std::vector<ConstraintCheck> constraints;
  std::vector<MomentCheck> moments;

  bool all_pass() const;
  double worst_violation_rate() const;
  std::string to_json() const;
};

struct ValidationConfig {
  int samples = 10000;
  std::uint64_t seed = 1;
};

/// Monte Carlo verification of the analytic propagation at a solved
/// policy: realizes every quantity, compares empirical moments and
/// violation rates against the closed forms, and checks the balance and
/// storage-path identities per sample.
ValidationReport validate_solution(const GridCase& grid, const BuildResult& built,
                                   const PolicySolution& solution,
                                   const ValidationConfig& config);

}  // namespace stochopf
