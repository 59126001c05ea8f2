#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stochopf/runner.hpp"

namespace {

std::vector<std::pair<int, int>> parse_sweep_points(const std::string& s) {
  std::vector<std::pair<int, int>> points;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos) {
      throw CLI::ValidationError("--sweep-points", "expected nd:ns pairs, e.g. 1:1,2:1");
    }
    points.emplace_back(std::stoi(tok.substr(0, colon)), std::stoi(tok.substr(colon + 1)));
  }
  return points;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "stochopf: multi-period chance-constrained DC-OPF with storage, solved as an SOCP"};

  stochopf::RunManifest m;
  std::string sweep_points;
  std::string epsilons;
  std::string balancings;

  app.add_option("--case", m.case_path, "grid case JSON")->required();
  app.add_option("--scenario", m.scenario, "s1 (no storage), s2, or s3 (variance caps)")
      ->check(CLI::IsMember({"s1", "s2", "s3"}));
  app.add_option("--epsilon", m.epsilon, "risk level per constraint family");
  app.add_option("--balancing", m.balancing, "local or global")
      ->check(CLI::IsMember({"local", "global"}));
  app.add_option("--horizon", m.horizon, "number of hourly steps T");
  app.add_option("--forecast", m.forecast_source,
                 "'artificial' or a forecast JSON / historical CSV path");
  app.add_option("--factor", m.factor_path,
                 "factor file for artificial forecasts when T != 12");
  app.add_option("--samples", m.samples, "Monte Carlo validation sample count");
  app.add_option("--seed", m.seed, "sample seed");
  app.add_option("--out", m.out_dir, "output directory");
  app.add_option("--jobs", m.jobs, "parallel sweep workers");
  app.add_flag("--sweep", m.sweep, "run the complexity sweep instead of one scenario");
  app.add_option("--sweep-points", sweep_points, "sweep axes as nd:ns pairs, e.g. 1:1,2:1,3:1");
  app.add_option("--sweep-epsilons", epsilons, "comma list of risk levels for the sweep");
  app.add_option("--sweep-balancings", balancings, "comma list of balancing modes");
  app.add_flag("--fit-forecasts", m.fit_forecasts_only,
               "only fit and export forecast JSON files");
  app.add_flag("--terminal-band-fraction", m.terminal_band_fraction,
               "read the storage terminal band as a fraction of capacity");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!sweep_points.empty()) m.sweep_points = parse_sweep_points(sweep_points);
    if (!epsilons.empty()) {
      std::stringstream ss(epsilons);
      std::string tok;
      while (std::getline(ss, tok, ',')) m.sweep_epsilons.push_back(std::stod(tok));
    }
    if (!balancings.empty()) {
      std::stringstream ss(balancings);
      std::string tok;
      while (std::getline(ss, tok, ',')) m.sweep_balancings.push_back(tok);
    }
    return stochopf::run_manifest(m);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
