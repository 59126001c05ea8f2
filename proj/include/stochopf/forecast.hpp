#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stochopf/netcase.hpp"

namespace stochopf {

/// Per-disturbance forecast over the horizon: mean vector and a
/// lower-triangular factor of the predictive covariance. An all-zero
/// factor encodes a deterministic load.
struct Forecast {
  int horizon = 0;
  Eigen::VectorXd mean;    // length T
  Eigen::MatrixXd factor;  // T x T, strictly zero above the diagonal

  void validate() const;
  bool deterministic() const { return factor.isZero(0.0); }
  /// Var(d(t)) = sum_{k<=t} factor(t,k)^2, t is 1-based.
  double variance_at(int t) const;
};

Forecast forecast_from_json(const std::string& json_text);
Forecast forecast_from_json_file(const std::string& path);
std::string forecast_to_json(const Forecast& f);

enum class KernelKind { cosine, rbf, constant };

struct KernelComponent {
  KernelKind kind = KernelKind::rbf;
  double variance = 1.0;     // multiplicative factor; the constant kernel's value
  double lengthscale = 1.0;  // unused by the constant component
};

struct KernelSpec {
  std::vector<KernelComponent> components;
  double noise_variance = 0.0;

  void validate() const;
  /// Default composite used for wind series: cosine + rbf + constant.
  static KernelSpec composite_default();
};

double kernel_eval(const KernelSpec& spec, double t, double t_prime);

/// Fitted GP posterior: training data plus the Cholesky factor of the
/// Gram matrix. Prediction is the standard conditional Gaussian.
class GprPosterior {
 public:
  GprPosterior() = default;
  /// Prior process: no training data, predictions from the kernel alone.
  explicit GprPosterior(KernelSpec spec) : spec_(std::move(spec)) {}
  const KernelSpec& spec() const { return spec_; }
  double log_marginal_likelihood() const { return lml_; }

  void predict(const Eigen::VectorXd& horizon_times, Eigen::VectorXd& mean,
               Eigen::MatrixXd& cov) const;

  friend GprPosterior gpr_fit(const Eigen::VectorXd&, const Eigen::VectorXd&,
                              const KernelSpec&, bool);

 private:
  KernelSpec spec_;
  Eigen::VectorXd times_;
  Eigen::VectorXd values_;
  Eigen::MatrixXd chol_;   // L with L L^T = K + noise I (+ escalated jitter)
  Eigen::VectorXd alpha_;  // (K + noise I)^{-1} y
  double lml_ = 0.0;
  double jitter_used_ = 0.0;
};

/// Fit a GP to (times, values). With `optimize` set, hyperparameters are
/// tuned by a deterministic multi-start coordinate search on the log
/// marginal likelihood (16 starts, log-space bounds).
GprPosterior gpr_fit(const Eigen::VectorXd& times, const Eigen::VectorXd& values,
                     const KernelSpec& spec, bool optimize);

/// Lower-triangular L with L L^T = cov + jitter I (elementwise 1e-8).
Eigen::MatrixXd factorize(const Eigen::MatrixXd& cov, double jitter = 1e-7);

/// Centered moving average; the window shrinks symmetrically at the edges.
std::vector<double> smooth_rolling(const std::vector<double>& series, int window);

/// Linear scaling so the series peak equals target_peak.
std::vector<double> scale_to_capacity(const std::vector<double>& series, double target_peak);

/// Mean profile -d_nom (1 + 0.1 sin(2 pi (t-1)/T)); the factor source is
/// negated for uncertain buses and zero for plain loads.
Forecast artificial_forecast(double d_nom, int horizon, const Eigen::MatrixXd& factor_source);
Forecast artificial_forecast(double d_nom, int horizon);  // deterministic

/// The built-in 12-step variance factor used by artificial forecasts at
/// T = 12 (entries scaled by 1e-4; top-left entry 87e-4).
Eigen::MatrixXd artificial_factor_t12();

struct HistoricalSeries {
  std::vector<std::string> timestamps;
  std::vector<double> power_mw;
};

/// CSV with header `timestamp,power_mw`, hourly cadence assumed.
HistoricalSeries read_series_csv(const std::string& path);

}  // namespace stochopf
