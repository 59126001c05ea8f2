#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochopf {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Line {
  int id = 0;
  int from = 0;
  int to = 0;
  double x = 0.0;           // series reactance, per unit
  double p_line_max = 0.0;  // thermal rating, per unit
  // flow band; defaults to +/- 0.85 * p_line_max when absent in the case file
  double c_min = 0.0;
  double c_max = 0.0;
};

struct Generator {
  int bus = 0;
  double u_min = 0.0;
  double u_max = 0.0;
  double du_min = 0.0;  // per-step ramp band
  double du_max = 0.0;
  double gamma2 = 0.0;  // quadratic cost coefficients
  double gamma1 = 0.0;
  double gamma0 = 0.0;
};

struct Storage {
  int bus = 0;
  double e_min = 0.0;
  double e_max = 0.0;
  double s_min = 0.0;
  double s_max = 0.0;
  double e_ic_mean = 0.0;
  double e_ic_var = 0.0;
  double e_term_min = 0.0;
  double e_term_max = 0.0;
};

struct DisturbanceRef {
  int bus = 0;
  std::string forecast;  // label resolved by the runner ("artificial" or a path)
};

struct FixedLoad {
  int bus = 0;
  double d_nom = 0.0;
};

/// Static network description. Immutable after parse_case; safe to share.
struct GridCase {
  std::string name;
  std::vector<int> buses;  // external ids, sorted
  std::vector<Line> lines;
  std::vector<Generator> generators;    // sorted by bus
  std::vector<Storage> storages;        // sorted by bus
  std::vector<DisturbanceRef> disturbances;  // sorted by bus
  std::vector<FixedLoad> loads;         // sorted by bus

  // dense index of an external bus id
  int bus_index(int bus) const;
  int num_buses() const { return static_cast<int>(buses.size()); }

 private:
  friend GridCase parse_case(const std::string& json_text, const std::string& origin);
  std::map<int, int> index_of_;
};

/// Parse and validate a case document (JSON text). `origin` names the
/// source in error messages.
GridCase parse_case(const std::string& json_text, const std::string& origin = "<case>");
GridCase parse_case_file(const std::string& path);

/// Power transfer distribution matrix: lines x buses, rows ordered by
/// line id. For balanced injections the product is independent of the
/// reference bus used in construction.
struct Ptdf {
  Eigen::MatrixXd phi;
  int reference_bus = 0;

  Eigen::VectorXd flows(const Eigen::VectorXd& injections) const {
    return phi * injections;
  }
};

Ptdf compute_ptdf(const GridCase& grid, int reference_bus);

/// Default reference: the first generator bus, else the first bus.
Ptdf compute_ptdf(const GridCase& grid);

}  // namespace stochopf
