#include "stochopf/conic_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace stochopf {

namespace {
constexpr int kNotConverged = 0;
constexpr int kOptimal = 1;
constexpr int kPrimalInfeasible = 2;
constexpr int kDualInfeasible = 3;
constexpr int kReducedOffset = 10;
}  // namespace

const char* to_string(ConicStatus s) {
  switch (s) {
    case ConicStatus::optimal: return "optimal";
    case ConicStatus::near_optimal: return "near_optimal";
    case ConicStatus::primal_infeasible: return "primal_infeasible";
    case ConicStatus::dual_infeasible: return "dual_infeasible";
    case ConicStatus::max_iterations: return "max_iterations";
    case ConicStatus::numerical_problem: return "numerical_problem";
  }
  return "unknown";
}

ConicSolver::ConicSolver(Eigen::SparseMatrix<double> G, Eigen::SparseMatrix<double> A,
                         Eigen::VectorXd c, Eigen::VectorXd h, Eigen::VectorXd b,
                         int n_orthant, std::vector<int> soc_dims, SolverSettings settings)
    : settings_(settings),
      G_(std::move(G)),
      A_(std::move(A)),
      c_(std::move(c)),
      h_(std::move(h)),
      b_(std::move(b)),
      nl_(n_orthant),
      soc_dims_(std::move(soc_dims)) {
  n_ = static_cast<int>(c_.size());
  p_ = static_cast<int>(A_.rows());
  m_ = static_cast<int>(G_.rows());
  if (A_.cols() == 0 && p_ == 0) A_.resize(0, n_);
  if (G_.cols() != n_ || A_.cols() != n_) {
    throw std::invalid_argument("conic solver: matrix/vector dimensions disagree");
  }
  int rows = nl_;
  soc_row_.reserve(soc_dims_.size());
  for (int q : soc_dims_) {
    if (q < 2) throw std::invalid_argument("conic solver: SOC dimension must be >= 2");
    soc_row_.push_back(rows);
    rows += q;
  }
  if (rows != m_ || h_.size() != m_ || b_.size() != p_) {
    throw std::invalid_argument("conic solver: cone sizes do not match G rows");
  }

  me_ = m_ + 2 * static_cast<int>(soc_dims_.size());
  dim_k_ = n_ + p_ + me_;

  expanded_row_.resize(m_);
  for (int r = 0; r < nl_; ++r) expanded_row_[r] = r;
  {
    int shift = 0;
    for (std::size_t ci = 0; ci < soc_dims_.size(); ++ci) {
      const int base = soc_row_[ci];
      for (int k = 0; k < soc_dims_[ci]; ++k) {
        expanded_row_[base + k] = base + shift + k;
      }
      shift += 2;
    }
  }

  soc_.resize(soc_dims_.size());
  for (std::size_t ci = 0; ci < soc_dims_.size(); ++ci) {
    soc_[ci].dim = soc_dims_[ci];
    soc_[ci].q.resize(soc_dims_[ci] - 1);
  }
  lp_w2_.resize(nl_);

  equilibrate();
  Gt_ = G_.transpose();
  At_ = A_.transpose();
  setup_kkt();
}

void ConicSolver::equilibrate() {
  x_equil_ = Eigen::VectorXd::Ones(n_);
  a_equil_ = Eigen::VectorXd::Ones(p_);
  g_equil_ = Eigen::VectorXd::Ones(m_);

  auto sqrt_or_one = [](double v) { return std::fabs(v) < 1e-6 ? 1.0 : std::sqrt(v); };

  for (int iter = 0; iter < settings_.equil_iters; ++iter) {
    Eigen::VectorXd xs = Eigen::VectorXd::Zero(n_);
    Eigen::VectorXd as = Eigen::VectorXd::Zero(p_);
    Eigen::VectorXd gs = Eigen::VectorXd::Zero(m_);

    for (int col = 0; col < n_; ++col) {
      for (Eigen::SparseMatrix<double>::InnerIterator jt(A_, col); jt; ++jt) {
        xs(col) = std::max(xs(col), std::fabs(jt.value()));
        as(jt.row()) = std::max(as(jt.row()), std::fabs(jt.value()));
      }
      for (Eigen::SparseMatrix<double>::InnerIterator jt(G_, col); jt; ++jt) {
        xs(col) = std::max(xs(col), std::fabs(jt.value()));
        gs(jt.row()) = std::max(gs(jt.row()), std::fabs(jt.value()));
      }
    }
    // rows of one cone share a scale so the cone geometry is preserved
    for (std::size_t ci = 0; ci < soc_dims_.size(); ++ci) {
      const double total = gs.segment(soc_row_[ci], soc_dims_[ci]).sum();
      gs.segment(soc_row_[ci], soc_dims_[ci]).setConstant(total);
    }
    xs = xs.unaryExpr(sqrt_or_one);
    as = as.unaryExpr(sqrt_or_one);
    gs = gs.unaryExpr(sqrt_or_one);

    for (int col = 0; col < n_; ++col) {
      for (Eigen::SparseMatrix<double>::InnerIterator jt(A_, col); jt; ++jt) {
        jt.valueRef() /= as(jt.row()) * xs(col);
      }
      for (Eigen::SparseMatrix<double>::InnerIterator jt(G_, col); jt; ++jt) {
        jt.valueRef() /= gs(jt.row()) * xs(col);
      }
    }
    x_equil_ = x_equil_.cwiseProduct(xs);
    a_equil_ = a_equil_.cwiseProduct(as);
    g_equil_ = g_equil_.cwiseProduct(gs);
  }

  c_ = c_.cwiseQuotient(x_equil_);
  b_ = b_.cwiseQuotient(a_equil_);
  h_ = h_.cwiseQuotient(g_equil_);
}

void ConicSolver::setup_kkt() {
  /*
   *      [ dI   A'   G~' ]
   *  K = [ A   -dI    0  ]      (upper triangle stored)
   *      [ G~   0    -V  ]
   *
   * V carries the cone scalings; each SOC block is expanded by two
   * auxiliary rows so its entries stay sparse:
   *   -V_soc = [ -D   -v   -u ]
   *            [ -v'  -1    0 ]
   *            [ -u'   0    1 ]   (times eta^2)
   */
  K_.resize(dim_k_, dim_k_);
  std::vector<Eigen::Triplet<double>> trip;

  for (int k = 0; k < n_; ++k) trip.emplace_back(k, k, settings_.deltastat);
  for (int k = 0; k < p_; ++k) trip.emplace_back(n_ + k, n_ + k, -settings_.deltastat);

  for (int col = 0; col < p_; ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator jt(At_, col); jt; ++jt) {
      trip.emplace_back(jt.row(), n_ + col, jt.value());
    }
  }
  for (int col = 0; col < m_; ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator jt(Gt_, col); jt; ++jt) {
      trip.emplace_back(jt.row(), n_ + p_ + expanded_row_[col], jt.value());
    }
  }

  const int z0 = n_ + p_;
  for (int r = 0; r < nl_; ++r) trip.emplace_back(z0 + r, z0 + r, -1.0);
  for (std::size_t ci = 0; ci < soc_dims_.size(); ++ci) {
    const int dim = soc_dims_[ci];
    const int base = z0 + expanded_row_[soc_row_[ci]];
    for (int k = 0; k < dim; ++k) trip.emplace_back(base + k, base + k, -1.0);
    const int aux1 = base + dim;
    trip.emplace_back(aux1, aux1, -1.0);
    for (int k = 1; k < dim; ++k) trip.emplace_back(base + k, aux1, 0.0);
    const int aux2 = aux1 + 1;
    trip.emplace_back(aux2, aux2, 1.0);
    for (int k = 0; k < dim; ++k) trip.emplace_back(base + k, aux2, 0.0);
  }

  K_.setFromTriplets(trip.begin(), trip.end());
  K_.makeCompressed();

  // signed static regularization per row; refinement solves against the
  // unregularized system with the factorization as preconditioner
  reg_sign_.resize(dim_k_);
  reg_sign_.head(n_).setConstant(settings_.deltastat);
  reg_sign_.segment(n_, p_).setConstant(-settings_.deltastat);
  reg_sign_.segment(n_ + p_, me_).setConstant(-settings_.deltastat);
  for (std::size_t ci = 0; ci < soc_dims_.size(); ++ci) {
    const int base = n_ + p_ + expanded_row_[soc_row_[ci]];
    reg_sign_(base + soc_dims_[ci]) = 0.0;                        // aux1
    reg_sign_(base + soc_dims_[ci] + 1) = settings_.deltastat;    // aux2
  }

  // pointer cache in the exact order write_scalings_to_kkt uses
  scaling_ptr_.clear();
  for (int r = 0; r < nl_; ++r) scaling_ptr_.push_back(&K_.coeffRef(z0 + r, z0 + r));
  for (std::size_t ci = 0; ci < soc_dims_.size(); ++ci) {
    const int dim = soc_dims_[ci];
    const int base = z0 + expanded_row_[soc_row_[ci]];
    for (int k = 0; k < dim; ++k) scaling_ptr_.push_back(&K_.coeffRef(base + k, base + k));
    const int aux1 = base + dim;
    scaling_ptr_.push_back(&K_.coeffRef(aux1, aux1));
    for (int k = 1; k < dim; ++k) scaling_ptr_.push_back(&K_.coeffRef(base + k, aux1));
    const int aux2 = aux1 + 1;
    scaling_ptr_.push_back(&K_.coeffRef(aux2, aux2));
    for (int k = 0; k < dim; ++k) scaling_ptr_.push_back(&K_.coeffRef(base + k, aux2));
  }
}

void ConicSolver::set_identity_scalings() {
  lp_w2_.setOnes();
  for (SocScaling& sc : soc_) {
    sc.eta2 = 1.0;
    sc.d1 = 1.0;
    sc.u0 = 0.0;
    sc.u1 = 0.0;
    sc.v1 = 0.0;
    sc.a = 1.0;
    sc.q.setZero();
  }
  write_scalings_to_kkt();
}

bool ConicSolver::update_scalings() {
  lp_w2_ = it_.s.head(nl_).cwiseQuotient(it_.z.head(nl_));

  for (std::size_t ci = 0; ci < soc_.size(); ++ci) {
    SocScaling& sc = soc_[ci];
    const int base = soc_row_[ci];
    const auto s1 = it_.s.segment(base + 1, sc.dim - 1);
    const auto z1 = it_.z.segment(base + 1, sc.dim - 1);
    const double sres = it_.s(base) * it_.s(base) - s1.squaredNorm();
    const double zres = it_.z(base) * it_.z(base) - z1.squaredNorm();
    if (sres <= 0.0 || zres <= 0.0) return false;

    const double snorm = std::sqrt(sres);
    const double znorm = std::sqrt(zres);
    Eigen::VectorXd sbar = it_.s.segment(base, sc.dim) / snorm;
    Eigen::VectorXd zbar = it_.z.segment(base, sc.dim) / znorm;

    sc.eta2 = snorm / znorm;
    double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));

    sc.a = (0.5 / gamma) * (sbar(0) + zbar(0));
    sc.q = (0.5 / gamma) * (sbar.tail(sc.dim - 1) - zbar.tail(sc.dim - 1));
    const double w = sc.q.squaredNorm();

    const double cc = (1.0 + sc.a) + w / (1.0 + sc.a);
    const double dd = 1.0 + 2.0 / (1.0 + sc.a) + w / ((1.0 + sc.a) * (1.0 + sc.a));
    const double d1 =
        std::max(0.0, 0.5 * (sc.a * sc.a + w * (1.0 - cc * cc / (1.0 + w * dd))));
    const double u0_sq = sc.a * sc.a + w - d1;
    if (u0_sq <= 0.0) return false;
    const double c2byu02 = cc * cc / u0_sq;
    if (c2byu02 - dd <= 0.0) return false;

    sc.d1 = d1;
    sc.u0 = std::sqrt(u0_sq);
    sc.u1 = std::sqrt(c2byu02);
    sc.v1 = std::sqrt(c2byu02 - dd);
  }
  scale_w(it_.z, it_.lambda);
  return true;
}

void ConicSolver::write_scalings_to_kkt() {
  std::size_t i = 0;
  for (int r = 0; r < nl_; ++r) {
    *scaling_ptr_[i++] = -lp_w2_(r) - settings_.deltastat;
  }
  for (const SocScaling& sc : soc_) {
    *scaling_ptr_[i++] = -sc.eta2 * sc.d1 - settings_.deltastat;
    for (int k = 1; k < sc.dim; ++k) *scaling_ptr_[i++] = -sc.eta2 - settings_.deltastat;
    *scaling_ptr_[i++] = -sc.eta2;  // aux1 diagonal
    for (int k = 1; k < sc.dim; ++k) *scaling_ptr_[i++] = -sc.eta2 * sc.v1 * sc.q(k - 1);
    *scaling_ptr_[i++] = sc.eta2 + settings_.deltastat;  // aux2 diagonal
    *scaling_ptr_[i++] = -sc.eta2 * sc.u0;
    for (int k = 1; k < sc.dim; ++k) *scaling_ptr_[i++] = -sc.eta2 * sc.u1 * sc.q(k - 1);
  }
}

bool ConicSolver::factorize() {
  if (!analyzed_) {
    ldlt_.analyzePattern(K_);
    analyzed_ = true;
  }
  ldlt_.factorize(K_);
  return ldlt_.info() == Eigen::Success;
}

void ConicSolver::scale_w(const Eigen::VectorXd& z, Eigen::VectorXd& out) const {
  out.resize(m_);
  out.head(nl_) = lp_w2_.cwiseSqrt().cwiseProduct(z.head(nl_));
  for (std::size_t ci = 0; ci < soc_.size(); ++ci) {
    const SocScaling& sc = soc_[ci];
    const int base = soc_row_[ci];
    const double eta = std::sqrt(sc.eta2);
    const auto z1 = z.segment(base + 1, sc.dim - 1);
    const double zeta = sc.q.dot(z1);
    const double factor = z(base) + zeta / (1.0 + sc.a);
    out(base) = eta * (sc.a * z(base) + zeta);
    out.segment(base + 1, sc.dim - 1) = eta * (z1 + factor * sc.q);
  }
}

double ConicSolver::conic_product(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                                  Eigen::VectorXd& out) const {
  out.head(nl_) = u.head(nl_).cwiseProduct(v.head(nl_));
  double mu = out.head(nl_).lpNorm<1>();
  for (std::size_t ci = 0; ci < soc_.size(); ++ci) {
    const int base = soc_row_[ci];
    const int dim = soc_[ci].dim;
    const double u0 = u(base);
    const double v0 = v(base);
    out(base) = u.segment(base, dim).dot(v.segment(base, dim));
    mu += std::fabs(out(base));
    out.segment(base + 1, dim - 1) =
        u0 * v.segment(base + 1, dim - 1) + v0 * u.segment(base + 1, dim - 1);
  }
  return mu;
}

void ConicSolver::conic_division(const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                                 Eigen::VectorXd& out) const {
  out.head(nl_) = w.head(nl_).cwiseQuotient(u.head(nl_));
  for (std::size_t ci = 0; ci < soc_.size(); ++ci) {
    const int base = soc_row_[ci];
    const int dim = soc_[ci].dim;
    const double u0 = u(base);
    const double w0 = w(base);
    const auto u1 = u.segment(base + 1, dim - 1);
    const auto w1 = w.segment(base + 1, dim - 1);
    const double rho = u0 * u0 - u1.squaredNorm();
    const double zeta = u1.dot(w1);
    const double factor = (zeta / u0 - w0) / rho;
    out(base) = (u0 * w0 - zeta) / rho;
    out.segment(base + 1, dim - 1) = factor * u1 + w1 / u0;
  }
}

void ConicSolver::bring_to_cone(const Eigen::VectorXd& r, Eigen::VectorXd& s) const {
  double alpha = -0.99;
  for (int i = 0; i < nl_; ++i) {
    if (r(i) <= 0.0 && -r(i) > alpha) alpha = -r(i);
  }
  for (std::size_t ci = 0; ci < soc_.size(); ++ci) {
    const int base = soc_row_[ci];
    const double res = r(base) - r.segment(base + 1, soc_[ci].dim - 1).norm();
    if (res <= 0.0 && -res > alpha) alpha = -res;
  }
  alpha += 1.0;
  s = r;
  s.head(nl_).array() += alpha;
  for (std::size_t ci = 0; ci < soc_.size(); ++ci) s(soc_row_[ci]) += alpha;
}

int ConicSolver::solve_kkt(const Eigen::VectorXd& rhs, Eigen::VectorXd& dx,
                           Eigen::VectorXd& dy, Eigen::VectorXd& dz) {
  Eigen::VectorXd sol = ldlt_.solve(rhs);

  const double threshold = (1.0 + rhs.lpNorm<Eigen::Infinity>()) * settings_.linsysacc;
  double prev_err = std::numeric_limits<double>::max();
  Eigen::VectorXd correction(dim_k_);

  // refine against the expanded system exactly as factorized
  int k_ref = 0;
  Eigen::VectorXd resid(dim_k_);
  for (k_ref = 0; k_ref <= settings_.nitref; ++k_ref) {
    resid = rhs;
    resid.noalias() -= K_.selfadjointView<Eigen::Upper>() * sol;
    resid += reg_sign_.cwiseProduct(sol);
    const double err = resid.lpNorm<Eigen::Infinity>();

    if (k_ref > 0 && err > prev_err) {
      sol -= correction;
      --k_ref;
      break;
    }
    if (k_ref == settings_.nitref || err < threshold ||
        (k_ref > 0 && prev_err < settings_.irerrfact * err)) {
      break;
    }
    prev_err = err;
    correction = ldlt_.solve(resid);
    sol += correction;
  }

  dx = sol.head(n_);
  dy = sol.segment(n_, p_);
  dz.resize(m_);
  for (int r = 0; r < m_; ++r) dz(r) = sol(n_ + p_ + expanded_row_[r]);
  return k_ref;
}

double ConicSolver::line_search(const Eigen::VectorXd& lambda, const Eigen::VectorXd& ds,
                                const Eigen::VectorXd& dz, double tau, double dtau,
                                double kap, double dkap) const {
  double alpha = 10.0;
  if (nl_ > 0) {
    const double rhomin = (ds.head(nl_).cwiseQuotient(lambda.head(nl_))).minCoeff();
    const double sigmamin = (dz.head(nl_).cwiseQuotient(lambda.head(nl_))).minCoeff();
    const double eps = 1e-13;
    if (-sigmamin > -rhomin) {
      alpha = sigmamin < 0.0 ? 1.0 / (-sigmamin) : 1.0 / eps;
    } else {
      alpha = rhomin < 0.0 ? 1.0 / (-rhomin) : 1.0 / eps;
    }
  }

  const double tau_bound = -tau / dtau;
  const double kap_bound = -kap / dkap;
  if (tau_bound > 0.0 && tau_bound < alpha) alpha = tau_bound;
  if (kap_bound > 0.0 && kap_bound < alpha) alpha = kap_bound;

  for (std::size_t ci = 0; ci < soc_.size(); ++ci) {
    const int base = soc_row_[ci];
    const int dim = soc_[ci].dim;
    const auto lk1 = lambda.segment(base + 1, dim - 1);
    const double lknorm2 = lambda(base) * lambda(base) - lk1.squaredNorm();
    if (lknorm2 <= 0.0) continue;
    const double lknorm = std::sqrt(lknorm2);
    const double lk0 = lambda(base) / lknorm;
    const Eigen::VectorXd lkbar1 = lk1 / lknorm;
    const double lknorminv = 1.0 / lknorm;

    const auto dsk1 = ds.segment(base + 1, dim - 1);
    const auto dzk1 = dz.segment(base + 1, dim - 1);
    const double lds = lk0 * ds(base) - lkbar1.dot(dsk1);
    const double ldz = lk0 * dz(base) - lkbar1.dot(dzk1);

    double factor = (lds + ds(base)) / (lk0 + 1.0);
    const double rho0 = lknorminv * lds;
    const double rhonorm = (lknorminv * (dsk1 - factor * lkbar1)).norm() - rho0;

    factor = (ldz + dz(base)) / (lk0 + 1.0);
    const double sig0 = lknorminv * ldz;
    const double signorm = (lknorminv * (dzk1 - factor * lkbar1)).norm() - sig0;

    const double conic_step = std::max({0.0, rhonorm, signorm});
    if (conic_step != 0.0) alpha = std::min(alpha, 1.0 / conic_step);
  }
  return std::clamp(alpha, settings_.stepmin, settings_.stepmax);
}

void ConicSolver::compute_residuals() {
  rx_ = -(Gt_ * it_.z);
  if (p_ > 0) rx_ -= At_ * it_.y;
  hresx_ = rx_.norm();
  rx_ -= it_.tau * c_;

  if (p_ > 0) {
    ry_ = A_ * it_.x;
    hresy_ = ry_.norm();
    ry_ -= it_.tau * b_;
  } else {
    ry_.resize(0);
    hresy_ = 0.0;
  }

  rz_ = it_.s + G_ * it_.x;
  hresz_ = rz_.norm();
  rz_ -= it_.tau * h_;

  cx_ = c_.dot(it_.x);
  by_ = p_ > 0 ? b_.dot(it_.y) : 0.0;
  hz_ = h_.dot(it_.z);
  rt_ = it_.kap + cx_ + by_ + hz_;

  nx_ = it_.x.norm();
  ny_ = it_.y.norm();
  nz_ = it_.z.norm();
  ns_ = it_.s.norm();
}

void ConicSolver::update_statistics() {
  it_.gap = it_.s.dot(it_.z);
  it_.mu = (it_.gap + it_.kap * it_.tau) / (nl_ + static_cast<int>(soc_.size()) + 1);
  it_.kapovert = it_.kap / it_.tau;
  it_.pcost = cx_ / it_.tau;
  it_.dcost = -(hz_ + by_) / it_.tau;

  if (it_.pcost < 0.0) {
    it_.relgap = it_.gap / (-it_.pcost);
    it_.has_relgap = true;
  } else if (it_.dcost > 0.0) {
    it_.relgap = it_.gap / it_.dcost;
    it_.has_relgap = true;
  } else {
    it_.has_relgap = false;
  }

  const double nry = p_ > 0 ? ry_.norm() / std::max(resy0_ + nx_, 1.0) : 0.0;
  const double nrz = rz_.norm() / std::max(resz0_ + nx_ + ns_, 1.0);
  it_.pres = std::max(nry, nrz) / it_.tau;
  it_.dres = rx_.norm() / std::max(resx0_ + ny_ + nz_, 1.0) / it_.tau;

  it_.pinfres = -1.0;
  it_.dinfres = -1.0;
  if ((hz_ + by_) / std::max(ny_ + nz_, 1.0) < -settings_.reltol) {
    it_.pinfres = hresx_ / std::max(ny_ + nz_, 1.0);
  }
  if (cx_ / std::max(nx_, 1.0) < -settings_.reltol) {
    it_.dinfres = std::max(hresy_ / std::max(nx_, 1.0),
                           hresz_ / std::max(nx_ + ns_, 1.0));
  }
}

int ConicSolver::check_exit(bool reduced) const {
  const double feastol = reduced ? settings_.feastol_inacc : settings_.feastol;
  const double abstol = reduced ? settings_.abstol_inacc : settings_.abstol;
  const double reltol = reduced ? settings_.reltol_inacc : settings_.reltol;
  const int offset = reduced ? kReducedOffset : 0;

  if ((-cx_ > 0.0 || -by_ - hz_ >= -abstol) && it_.pres < feastol && it_.dres < feastol &&
      (it_.gap < abstol || (it_.has_relgap && it_.relgap < reltol))) {
    return kOptimal + offset;
  }
  if (it_.dinfres >= 0.0 && it_.dinfres < feastol && it_.tau < it_.kap) {
    return kDualInfeasible + offset;
  }
  if ((it_.pinfres >= 0.0 && it_.pinfres < feastol && it_.tau < it_.kap) ||
      (it_.tau < feastol && it_.kap < feastol && it_.pinfres >= 0.0 &&
       it_.pinfres < feastol)) {
    return kPrimalInfeasible + offset;
  }
  return kNotConverged;
}

bool ConicSolver::better_than(const Iterate& a, const Iterate& b) const {
  if (a.pinfres >= 0.0 && a.kapovert > 1.0) {
    return a.gap > 0.0 && b.gap > 0.0 && a.gap < b.gap && a.pinfres > 0.0 &&
           a.pinfres < b.pres && a.mu > 0.0 && a.mu < b.mu;
  }
  return a.gap > 0.0 && b.gap > 0.0 && a.gap < b.gap && a.pres > 0.0 && a.pres < b.pres &&
         a.dres > 0.0 && a.dres < b.dres && a.kapovert > 0.0 && a.kapovert < b.kapovert &&
         a.mu > 0.0 && a.mu < b.mu;
}

ConicSolution ConicSolver::solve() {
  ConicSolution result;

  it_.x.setZero(n_);
  it_.y.setZero(p_);
  it_.z.setZero(m_);
  it_.s.setZero(m_);
  it_.lambda.setZero(m_);

  resx0_ = std::max(1.0, c_.norm());
  resy0_ = std::max(1.0, b_.norm());
  resz0_ = std::max(1.0, h_.norm());

  set_identity_scalings();
  if (!factorize()) {
    result.status = ConicStatus::numerical_problem;
    return result;
  }

  // expanded rhs slots for the cone block
  auto fill_z_rhs = [&](Eigen::VectorXd& rhs, const Eigen::VectorXd& zpart) {
    rhs.segment(n_ + p_, me_).setZero();
    for (int r = 0; r < m_; ++r) rhs(n_ + p_ + expanded_row_[r]) = zpart(r);
  };

  /*
   * Initialization: primal part from min ||Gx - h|| s.t. Ax = b, dual
   * part from min ||z|| s.t. G'z + A'y + c = 0; slacks/multipliers are
   * shifted into the cone interior.
   */
  Eigen::VectorXd rhs1 = Eigen::VectorXd::Zero(dim_k_);
  rhs1.segment(n_, p_) = b_;
  fill_z_rhs(rhs1, h_);

  Eigen::VectorXd dx1(n_), dy1(p_), dz1(m_);
  solve_kkt(rhs1, dx1, dy1, dz1);
  it_.x = dx1;
  bring_to_cone(-dz1, it_.s);

  Eigen::VectorXd rhs2 = Eigen::VectorXd::Zero(dim_k_);
  rhs2.head(n_) = -c_;
  Eigen::VectorXd dx2(n_), dy2(p_), dz2(m_);
  solve_kkt(rhs2, dx2, dy2, dz2);
  it_.y = dy2;
  bring_to_cone(dz2, it_.z);

  it_.tau = 1.0;
  it_.kap = 1.0;

  rhs1.head(n_) = -c_;  // from here on rhs1 = [-c; b; h]

  double pres_prev = std::numeric_limits<double>::max();
  double step = 0.0;
  int code = kNotConverged;
  int iter = 0;
  bool numerics_bail = false;

  Eigen::VectorXd W_dz(m_), ds_by_w(m_), ds1(m_), ds2(m_), dsfin(m_);

  for (iter = 0; iter <= settings_.max_iters; ++iter) {
    compute_residuals();
    update_statistics();

    if (settings_.verbose) {
      std::printf("it %3d  pcost %+.6e  gap %.2e  pres %.2e  dres %.2e  k/t %.2e\n", iter,
                  it_.pcost, it_.gap, it_.pres, it_.dres, it_.kapovert);
    }

    if (iter > 0 && (it_.pres > settings_.safeguard * pres_prev || it_.gap < 0.0)) {
      it_ = best_;
      code = check_exit(true);
      if (code == kNotConverged) numerics_bail = true;
      break;
    }
    pres_prev = it_.pres;

    code = check_exit(false);
    if (code != kNotConverged) break;

    if (iter > 0 && step == settings_.stepmin * settings_.step_scale) {
      it_ = best_;
      code = check_exit(true);
      if (code == kNotConverged) numerics_bail = true;
      break;
    }
    if (iter == settings_.max_iters) {
      if (!better_than(it_, best_)) it_ = best_;
      code = check_exit(true);
      break;
    }
    if (std::isnan(it_.pcost)) {
      if (iter > 0 && !better_than(it_, best_)) {
        it_ = best_;
        code = check_exit(true);
      }
      if (code == kNotConverged) numerics_bail = true;
      break;
    }

    if (iter == 0 || better_than(it_, best_)) best_ = it_;

    if (!update_scalings()) {
      it_ = best_;
      code = check_exit(true);
      if (code == kNotConverged) numerics_bail = true;
      break;
    }
    write_scalings_to_kkt();
    if (!factorize()) {
      it_ = best_;
      numerics_bail = true;
      break;
    }

    solve_kkt(rhs1, dx1, dy1, dz1);

    // affine (predictor) direction
    rhs2.head(n_) = rx_;
    rhs2.segment(n_, p_) = -ry_;
    fill_z_rhs(rhs2, it_.s - rz_);
    solve_kkt(rhs2, dx2, dy2, dz2);

    const double dtau_denom =
        it_.kap / it_.tau - c_.dot(dx1) - b_.dot(dy1) - h_.dot(dz1);
    const double dtauaff =
        (rt_ - it_.kap + c_.dot(dx2) + b_.dot(dy2) + h_.dot(dz2)) / dtau_denom;

    dz2 += dtauaff * dz1;
    scale_w(dz2, W_dz);
    ds_by_w = -W_dz - it_.lambda;
    const double dkapaff = -it_.kap - it_.kap / it_.tau * dtauaff;

    const double step_aff =
        line_search(it_.lambda, ds_by_w, W_dz, it_.tau, dtauaff, it_.kap, dkapaff);
    const double sigma = std::clamp(std::pow(1.0 - step_aff, 3.0), settings_.sigmamin,
                                    settings_.sigmamax);

    // combined (corrector) direction
    conic_product(it_.lambda, it_.lambda, ds1);
    conic_product(ds_by_w, W_dz, ds2);
    const double sigmamu = sigma * it_.mu;
    ds1 += ds2;
    ds1.head(nl_).array() -= sigmamu;
    for (std::size_t ci = 0; ci < soc_.size(); ++ci) ds1(soc_row_[ci]) -= sigmamu;

    conic_division(it_.lambda, ds1, ds_by_w);
    scale_w(ds_by_w, ds1);  // ds1 = W (lambda \ ds)

    const double one_minus_sigma = 1.0 - sigma;
    rhs2.head(n_) = one_minus_sigma * rx_;
    rhs2.segment(n_, p_) = -one_minus_sigma * ry_;
    fill_z_rhs(rhs2, -one_minus_sigma * rz_ + ds1);
    solve_kkt(rhs2, dx2, dy2, dz2);

    const double bkap = it_.kap * it_.tau + dkapaff * dtauaff - sigmamu;
    const double dtau = (one_minus_sigma * rt_ - bkap / it_.tau + c_.dot(dx2) +
                         b_.dot(dy2) + h_.dot(dz2)) /
                        dtau_denom;
    dx2 += dtau * dx1;
    dy2 += dtau * dy1;
    dz2 += dtau * dz1;

    scale_w(dz2, W_dz);
    ds_by_w = -(ds_by_w + W_dz);
    const double dkap = -(bkap + it_.kap * dtau) / it_.tau;

    step = settings_.step_scale *
           line_search(it_.lambda, ds_by_w, W_dz, it_.tau, dtau, it_.kap, dkap);
    scale_w(ds_by_w, dsfin);

    it_.x += step * dx2;
    it_.y += step * dy2;
    it_.z += step * dz2;
    it_.s += step * dsfin;
    it_.kap += step * dkap;
    it_.tau += step * dtau;
  }

  // map exit code and undo scalings
  if (numerics_bail || code == kNotConverged) {
    result.status = ConicStatus::numerical_problem;
  } else if (code == kOptimal) {
    result.status = ConicStatus::optimal;
  } else if (code == kOptimal + kReducedOffset) {
    result.status = ConicStatus::near_optimal;
  } else if (code == kPrimalInfeasible || code == kPrimalInfeasible + kReducedOffset) {
    result.status = ConicStatus::primal_infeasible;
  } else if (code == kDualInfeasible || code == kDualInfeasible + kReducedOffset) {
    result.status = ConicStatus::dual_infeasible;
  }

  result.x = it_.x.cwiseQuotient(x_equil_ * it_.tau);
  result.y = p_ > 0 ? Eigen::VectorXd(it_.y.cwiseQuotient(a_equil_ * it_.tau))
                    : Eigen::VectorXd();
  result.z = it_.z.cwiseQuotient(g_equil_ * it_.tau);
  result.s = it_.s.cwiseProduct(g_equil_ / it_.tau);
  result.primal_cost = it_.pcost;
  result.dual_cost = it_.dcost;
  result.gap = it_.gap;
  result.relative_gap = it_.has_relgap ? it_.relgap : -1.0;
  result.primal_residual = it_.pres;
  result.dual_residual = it_.dres;
  result.iterations = iter;
  return result;
}

}  // namespace stochopf
