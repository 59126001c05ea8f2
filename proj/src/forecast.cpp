#include "stochopf/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace stochopf {

using nlohmann::json;

void Forecast::validate() const {
  if (horizon < 1) throw ValidationError("forecast horizon must be >= 1");
  if (mean.size() != horizon || factor.rows() != horizon || factor.cols() != horizon) {
    throw ValidationError("forecast mean/factor dimensions do not match horizon");
  }
  for (int t = 0; t < horizon; ++t) {
    for (int k = t + 1; k < horizon; ++k) {
      if (factor(t, k) != 0.0) {
        throw ValidationError("forecast factor has a nonzero entry above the diagonal");
      }
    }
  }
  // Non-singularity: an uncertain load needs a nonzero diagonal. The sign
  // is free (L and -L factor the same covariance; the artificial profile
  // stores the negated matrix).
  if (!deterministic()) {
    for (int t = 0; t < horizon; ++t) {
      if (factor(t, t) == 0.0) {
        throw ValidationError("forecast factor diagonal must be nonzero for uncertain loads");
      }
    }
  }
}

double Forecast::variance_at(int t) const {
  double v = 0.0;
  for (int k = 0; k < t; ++k) {
    v += factor(t - 1, k) * factor(t - 1, k);
  }
  return v;
}

Forecast forecast_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid forecast JSON: ") + e.what());
  }
  if (!doc.contains("mean") || !doc["mean"].is_array()) {
    throw ParseError("forecast JSON: missing array field 'mean'");
  }
  Forecast f;
  f.horizon = static_cast<int>(doc["mean"].size());
  f.mean.resize(f.horizon);
  for (int i = 0; i < f.horizon; ++i) f.mean(i) = doc["mean"][i].get<double>();
  f.factor = Eigen::MatrixXd::Zero(f.horizon, f.horizon);
  if (doc.contains("factor")) {
    const auto& rows = doc["factor"];
    if (static_cast<int>(rows.size()) != f.horizon) {
      throw ParseError("forecast JSON: factor row count does not match mean length");
    }
    for (int r = 0; r < f.horizon; ++r) {
      if (static_cast<int>(rows[r].size()) != f.horizon) {
        throw ParseError("forecast JSON: factor is not square");
      }
      for (int cidx = 0; cidx < f.horizon; ++cidx) {
        f.factor(r, cidx) = rows[r][cidx].get<double>();
      }
    }
  }
  f.validate();
  return f;
}

Forecast forecast_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open forecast file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return forecast_from_json(buf.str());
}

std::string forecast_to_json(const Forecast& f) {
  json doc;
  doc["mean"] = json::array();
  for (int i = 0; i < f.horizon; ++i) doc["mean"].push_back(f.mean(i));
  doc["factor"] = json::array();
  for (int r = 0; r < f.horizon; ++r) {
    json row = json::array();
    for (int cidx = 0; cidx < f.horizon; ++cidx) row.push_back(f.factor(r, cidx));
    doc["factor"].push_back(row);
  }
  return doc.dump(2);
}

void KernelSpec::validate() const {
  for (const auto& c : components) {
    if (c.variance < 0.0) throw ValidationError("kernel variance must be >= 0");
    if (c.kind != KernelKind::constant && c.lengthscale <= 0.0) {
      throw ValidationError("kernel lengthscale must be > 0");
    }
  }
  if (noise_variance < 0.0) throw ValidationError("observation noise variance must be >= 0");
}

KernelSpec KernelSpec::composite_default() {
  KernelSpec s;
  s.components = {{KernelKind::cosine, 1.0, 24.0},
                  {KernelKind::rbf, 1.0, 6.0},
                  {KernelKind::constant, 0.1, 0.0}};
  s.noise_variance = 1e-2;
  return s;
}

double kernel_eval(const KernelSpec& spec, double t, double t_prime) {
  const double d = t - t_prime;
  double k = 0.0;
  for (const auto& c : spec.components) {
    switch (c.kind) {
      case KernelKind::cosine:
        k += c.variance * std::cos(2.0 * std::numbers::pi * d / c.lengthscale);
        break;
      case KernelKind::rbf:
        k += c.variance * std::exp(-d * d / (2.0 * c.lengthscale * c.lengthscale));
        break;
      case KernelKind::constant:
        k += c.variance;
        break;
    }
  }
  return k;
}

namespace {

Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::VectorXd& a,
                     const Eigen::VectorXd& b) {
  Eigen::MatrixXd K(a.size(), b.size());
  for (int i = 0; i < a.size(); ++i) {
    for (int j = 0; j < b.size(); ++j) {
      K(i, j) = kernel_eval(spec, a(i), b(j));
    }
  }
  return K;
}

struct CholResult {
  Eigen::MatrixXd L;
  double jitter = 0.0;
};

// LLT with escalating jitter; throws with a minimum-eigenvalue estimate
// when even the largest jitter fails.
CholResult chol_with_jitter(const Eigen::MatrixXd& K, double base_scale) {
  const double scale = std::max(base_scale, 1e-12);
  double jitter = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd Kj = K;
    if (jitter > 0.0) Kj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(Kj);
    if (llt.info() == Eigen::Success) {
      return {Eigen::MatrixXd(llt.matrixL()), jitter};
    }
    jitter = jitter == 0.0 ? 1e-10 * scale : jitter * 10.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
  std::ostringstream os;
  os << "Gram matrix not positive definite after jitter; minimum eigenvalue estimate "
     << es.eigenvalues().minCoeff();
  throw NumericalError(os.str());
}

struct HyperParams {
  // log-space values, one per tunable scalar
  std::vector<double> logv;
};

// Flatten/unflatten the tunable scalars of a KernelSpec.
std::vector<double> pack(const KernelSpec& s) {
  std::vector<double> v;
  for (const auto& c : s.components) {
    v.push_back(std::log(std::max(c.variance, 1e-10)));
    if (c.kind != KernelKind::constant) v.push_back(std::log(c.lengthscale));
  }
  v.push_back(std::log(std::max(s.noise_variance, 1e-10)));
  return v;
}

KernelSpec unpack(const KernelSpec& proto, const std::vector<double>& v) {
  KernelSpec s = proto;
  std::size_t i = 0;
  for (auto& c : s.components) {
    c.variance = std::exp(v[i++]);
    if (c.kind != KernelKind::constant) c.lengthscale = std::exp(v[i++]);
  }
  s.noise_variance = std::exp(v[i++]);
  return s;
}

double lml_of(const KernelSpec& spec, const Eigen::VectorXd& t, const Eigen::VectorXd& y) {
  const int n = static_cast<int>(t.size());
  Eigen::MatrixXd K = gram(spec, t, t);
  K.diagonal().array() += spec.noise_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd alpha = llt.solve(y);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
  return -0.5 * y.dot(alpha) - logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

// Small deterministic LCG for the multi-start draws.
struct Lcg {
  std::uint64_t state;
  double uniform() {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(state >> 11) * 0x1.0p-53;
  }
};

}  // namespace

GprPosterior gpr_fit(const Eigen::VectorXd& times, const Eigen::VectorXd& values,
                     const KernelSpec& spec, bool optimize) {
  if (times.size() != values.size() || times.size() < 1) {
    throw ValidationError("gpr_fit requires equally sized, nonempty times/values");
  }
  for (int i = 1; i < times.size(); ++i) {
    if (times(i) <= times(i - 1)) {
      throw ValidationError("gpr_fit requires strictly increasing times");
    }
  }
  spec.validate();

  KernelSpec best = spec;
  if (optimize) {
    // Multi-start coordinate search in log space. Bounds per scalar:
    // variances within [1e-6, 1e3] * var(y), lengthscales within
    // [0.5, 10 * span], noise within [1e-8, 1] * var(y).
    const double yvar = std::max((values.array() - values.mean()).square().mean(), 1e-8);
    const double span = std::max(times(times.size() - 1) - times(0), 1.0);

    const std::vector<double> start = pack(spec);
    const std::size_t dim = start.size();
    std::vector<double> lo(dim), hi(dim);
    {
      std::size_t i = 0;
      for (const auto& c : spec.components) {
        lo[i] = std::log(1e-6 * yvar);
        hi[i] = std::log(1e3 * yvar);
        ++i;
        if (c.kind != KernelKind::constant) {
          lo[i] = std::log(0.5);
          hi[i] = std::log(10.0 * span);
          ++i;
        }
      }
      lo[i] = std::log(1e-8 * yvar);
      hi[i] = std::log(std::max(yvar, 1e-6));
    }

    double best_lml = lml_of(spec, times, values);
    std::vector<double> best_v = start;

    Lcg rng{0x5eedf00dULL};
    for (int s = 0; s < 16; ++s) {
      std::vector<double> v(dim);
      if (s == 0) {
        v = start;
      } else {
        for (std::size_t i = 0; i < dim; ++i) {
          v[i] = lo[i] + rng.uniform() * (hi[i] - lo[i]);
        }
      }
      double f = lml_of(unpack(spec, v), times, values);
      // coordinate descent with a shrinking step
      for (double step = 1.0; step > 0.02; step *= 0.5) {
        bool improved = true;
        int sweeps = 0;
        while (improved && sweeps < 4) {
          improved = false;
          ++sweeps;
          for (std::size_t i = 0; i < dim; ++i) {
            for (const double dv : {step, -step}) {
              std::vector<double> w = v;
              w[i] = std::clamp(w[i] + dv, lo[i], hi[i]);
              const double fw = lml_of(unpack(spec, w), times, values);
              if (fw > f) {
                f = fw;
                v = w;
                improved = true;
              }
            }
          }
        }
      }
      if (f > best_lml) {
        best_lml = f;
        best_v = v;
      }
    }
    best = unpack(spec, best_v);
  }

  GprPosterior post;
  post.spec_ = best;
  post.times_ = times;
  post.values_ = values;

  Eigen::MatrixXd K = gram(best, times, times);
  K.diagonal().array() += best.noise_variance;
  const double scale = K.diagonal().maxCoeff();
  CholResult ch = chol_with_jitter(K, scale);
  post.chol_ = ch.L;
  post.jitter_used_ = ch.jitter;
  post.alpha_ = ch.L.transpose()
                    .triangularView<Eigen::Upper>()
                    .solve(ch.L.triangularView<Eigen::Lower>().solve(values));
  double logdet = 0.0;
  for (int i = 0; i < times.size(); ++i) logdet += std::log(ch.L(i, i));
  post.lml_ = -0.5 * values.dot(post.alpha_) - logdet -
              0.5 * times.size() * std::log(2.0 * std::numbers::pi);
  return post;
}

void GprPosterior::predict(const Eigen::VectorXd& horizon_times, Eigen::VectorXd& mean,
                           Eigen::MatrixXd& cov) const {
  const Eigen::MatrixXd Kss = gram(spec_, horizon_times, horizon_times);
  if (times_.size() == 0) {
    mean = Eigen::VectorXd::Zero(horizon_times.size());
    cov = Kss;
    return;
  }
  const Eigen::MatrixXd Ks = gram(spec_, times_, horizon_times);
  mean = Ks.transpose() * alpha_;
  const Eigen::MatrixXd V = chol_.triangularView<Eigen::Lower>().solve(Ks);
  cov = Kss - V.transpose() * V;
  // enforce symmetry lost to roundoff
  cov = 0.5 * (cov + cov.transpose()).eval();
}

Eigen::MatrixXd factorize(const Eigen::MatrixXd& cov, double jitter) {
  if (cov.rows() != cov.cols()) throw ValidationError("factorize requires a square matrix");
  if (jitter < 0.0) throw ValidationError("factorize requires jitter >= 0");
  if (!cov.isApprox(cov.transpose(), 1e-10)) {
    throw ValidationError("factorize requires a symmetric matrix");
  }
  Eigen::MatrixXd Kj = cov;
  Kj.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(Kj);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Cholesky factorization failed; try a larger jitter");
  }
  return llt.matrixL();
}

std::vector<double> smooth_rolling(const std::vector<double>& series, int window) {
  if (window < 1 || window % 2 == 0) {
    throw ValidationError("smooth_rolling requires an odd window >= 1");
  }
  const int n = static_cast<int>(series.size());
  std::vector<double> out(series.size());
  const int half = window / 2;
  for (int i = 0; i < n; ++i) {
    const int h = std::min({half, i, n - 1 - i});
    double acc = 0.0;
    for (int j = i - h; j <= i + h; ++j) acc += series[j];
    out[i] = acc / (2 * h + 1);
  }
  return out;
}

std::vector<double> scale_to_capacity(const std::vector<double>& series, double target_peak) {
  if (series.empty()) throw ValidationError("scale_to_capacity requires a nonempty series");
  const double peak = *std::max_element(series.begin(), series.end());
  if (peak <= 0.0) {
    throw ValidationError("scale_to_capacity requires a series with positive maximum");
  }
  std::vector<double> out(series.size());
  const double f = target_peak / peak;
  for (std::size_t i = 0; i < series.size(); ++i) out[i] = series[i] * f;
  return out;
}

Forecast artificial_forecast(double d_nom, int horizon, const Eigen::MatrixXd& factor_source) {
  if (horizon < 1) throw ValidationError("artificial_forecast requires horizon >= 1");
  if (factor_source.size() != 0 &&
      (factor_source.rows() != horizon || factor_source.cols() != horizon)) {
    throw ValidationError("artificial_forecast factor dimension does not match horizon");
  }
  Forecast f;
  f.horizon = horizon;
  f.mean.resize(horizon);
  for (int t = 1; t <= horizon; ++t) {
    f.mean(t - 1) =
        -d_nom * (1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * (t - 1) / horizon));
  }
  f.factor = factor_source.size() == 0 ? Eigen::MatrixXd::Zero(horizon, horizon)
                                       : Eigen::MatrixXd(-factor_source);
  f.validate();
  return f;
}

Forecast artificial_forecast(double d_nom, int horizon) {
  return artificial_forecast(d_nom, horizon, Eigen::MatrixXd());
}

Eigen::MatrixXd artificial_factor_t12() {
  static const int rows[12][12] = {
      {87, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
      {176, 20, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
      {292, 60, 7, 0, 0, 0, 0, 0, 0, 0, 0, 0},
      {434, 124, 26, 3, 0, 0, 0, 0, 0, 0, 0, 0},
      {594, 211, 63, 13, 3, 0, 0, 0, 0, 0, 0, 0},
      {764, 321, 123, 31, 13, 3, 0, 0, 0, 0, 0, 0},
      {937, 447, 208, 63, 32, 11, 3, 0, 0, 0, 0, 0},
      {1103, 582, 317, 109, 65, 27, 10, 3, 0, 0, 0, 0},
      {1257, 718, 447, 172, 116, 55, 26, 10, 3, 0, 0, 0},
      {1392, 847, 591, 251, 184, 98, 53, 26, 10, 3, 0, 0},
      {1504, 964, 741, 342, 271, 156, 94, 53, 24, 9, 3, 0},
      {1590, 1063, 889, 441, 371, 229, 151, 94, 50, 24, 9, 3}};
  Eigen::MatrixXd m(12, 12);
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 12; ++c) {
      m(r, c) = 1e-4 * rows[r][c];
    }
  }
  return m;
}

HistoricalSeries read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open series file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (line.rfind("timestamp", 0) != 0) {
    throw ParseError(path + ": expected header 'timestamp,power_mw'");
  }
  HistoricalSeries s;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError(path + ": line " + std::to_string(lineno) + ": expected two columns");
    }
    s.timestamps.push_back(line.substr(0, comma));
    try {
      s.power_mw.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw ParseError(path + ": line " + std::to_string(lineno) + ": bad power value");
    }
  }
  if (s.power_mw.empty()) throw ParseError(path + ": no data rows");
  return s;
}

}  // namespace stochopf
