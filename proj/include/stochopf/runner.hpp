#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stochopf/validate.hpp"

namespace stochopf {

/// Everything one experiment needs: case, forecast sources, scenario
/// knobs, output location, and the sweep axes.
struct RunManifest {
  std::string case_path;
  std::string forecast_source = "artificial";  // "artificial" or a csv/json path
  std::string factor_path;  // lower-triangular factor for artificial runs at T != 12
  std::string scenario = "s2";
  double epsilon = 0.05;
  std::string balancing = "local";
  int horizon = 24;
  int samples = 10000;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int jobs = 1;
  bool terminal_band_fraction = false;

  bool sweep = false;
  std::vector<std::pair<int, int>> sweep_points;  // (N_d, N_s)
  std::vector<double> sweep_epsilons;
  std::vector<std::string> sweep_balancings;

  bool fit_forecasts_only = false;

  void validate() const;
  ScenarioConfig to_config() const;
};

/// Forecasts for every disturbance bus of the case, resolved from the
/// manifest (artificial profile, forecast JSON, or GPR on a CSV series).
std::map<int, Forecast> resolve_forecasts(const GridCase& grid, const RunManifest& m);

struct ScenarioResult {
  GridCase grid;
  BuildResult built;
  PolicySolution solution;
  std::optional<ValidationReport> report;
};

/// Build + solve + validate one scenario.
ScenarioResult run_scenario(const RunManifest& m);

/// Write schedule.csv / costs.json / validation.json for a finished run.
void write_outputs(const RunManifest& m, const ScenarioResult& r);

struct SweepRow {
  std::string case_name;
  int n_d = 0;
  int n_s = 0;
  std::string balancing;
  double epsilon = 0.0;
  long long policy_vars = 0;
  double solve_seconds = 0.0;
  double objective = 0.0;
  std::string status;
};

/// Derive a case variant with n_d disturbances at the highest-load buses
/// and n_s storages (existing first, extra ones placed by seeded draw).
GridCase derive_sweep_case(const GridCase& base, int n_d, int n_s, std::uint64_t seed);

std::vector<SweepRow> run_sweep(const RunManifest& m);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

/// Forecast-fitting pipeline: smoothing, capacity scaling, GPR fit,
/// horizon prediction, factorization, JSON export per disturbance bus.
std::vector<std::string> fit_forecasts(const GridCase& grid, const RunManifest& m);

/// CLI entry; returns the process exit code.
int run_manifest(const RunManifest& m);

}  // namespace stochopf
