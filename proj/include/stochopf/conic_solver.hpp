#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <string>
#include <vector>

namespace stochopf {

struct SolverSettings {
  double feastol = 1e-8;
  double abstol = 1e-8;
  double reltol = 1e-8;
  double feastol_inacc = 1e-4;
  double abstol_inacc = 5e-5;
  double reltol_inacc = 5e-5;
  int max_iters = 200;
  int nitref = 9;          // iterative refinement cap per KKT solve
  double step_scale = 0.99;
  double stepmin = 1e-6;
  double stepmax = 0.999;
  double sigmamin = 1e-4;
  double sigmamax = 1.0;
  double deltastat = 7e-8;  // static KKT regularization
  double linsysacc = 1e-14;
  double irerrfact = 6.0;
  double safeguard = 500.0;
  int equil_iters = 3;
  bool verbose = false;
};

enum class ConicStatus {
  optimal,
  near_optimal,
  primal_infeasible,
  dual_infeasible,
  max_iterations,
  numerical_problem,
};

const char* to_string(ConicStatus s);

struct ConicSolution {
  ConicStatus status = ConicStatus::numerical_problem;
  Eigen::VectorXd x, y, z, s;
  double primal_cost = 0.0;
  double dual_cost = 0.0;
  double gap = 0.0;
  double relative_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
};

/*
 * Primal-dual interior-point solver for
 *
 *   min c'x   s.t.  A x = b,   G x + s = h,   s in K,
 *
 * K the product of a nonnegative orthant (first n_orthant rows of G)
 * and second-order cones of the given dimensions. Nesterov-Todd scaled
 * Mehrotra predictor-corrector on the homogeneous self-dual embedding;
 * the KKT systems use a sparse expansion of the SOC scaling blocks and
 * a quasi-definite static regularization so a single symbolic LDLT
 * factorization serves every iteration.
 */
class ConicSolver {
 public:
  ConicSolver(Eigen::SparseMatrix<double> G, Eigen::SparseMatrix<double> A,
              Eigen::VectorXd c, Eigen::VectorXd h, Eigen::VectorXd b, int n_orthant,
              std::vector<int> soc_dims, SolverSettings settings = {});

  ConicSolution solve();

 private:
  struct SocScaling {
    int dim = 0;
    double eta2 = 1.0;
    double a = 0.0;
    double d1 = 1.0;
    double u0 = 0.0;
    double u1 = 0.0;
    double v1 = 0.0;
    Eigen::VectorXd q;  // NT point tail
  };

  struct Iterate {
    Eigen::VectorXd x, y, z, s, lambda;
    double tau = 1.0, kap = 1.0;
    // statistics of the iterate
    double gap = 0.0, mu = 0.0, pcost = 0.0, dcost = 0.0;
    double pres = 0.0, dres = 0.0, relgap = -1.0, kapovert = 0.0;
    double pinfres = -1.0, dinfres = -1.0;
    bool has_relgap = false;
  };

  void equilibrate();
  void setup_kkt();
  void set_identity_scalings();
  bool update_scalings();
  void write_scalings_to_kkt();
  bool factorize();
  int solve_kkt(const Eigen::VectorXd& rhs, Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                Eigen::VectorXd& dz);
  void bring_to_cone(const Eigen::VectorXd& r, Eigen::VectorXd& s) const;
  void scale_w(const Eigen::VectorXd& z, Eigen::VectorXd& out) const;  // W z
  double conic_product(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                       Eigen::VectorXd& out) const;
  void conic_division(const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                      Eigen::VectorXd& out) const;
  double line_search(const Eigen::VectorXd& lambda, const Eigen::VectorXd& ds,
                     const Eigen::VectorXd& dz, double tau, double dtau, double kap,
                     double dkap) const;
  void compute_residuals();
  void update_statistics();
  int check_exit(bool reduced) const;
  bool better_than(const Iterate& a, const Iterate& b) const;

  SolverSettings settings_;
  Eigen::SparseMatrix<double> G_, A_, Gt_, At_;
  Eigen::VectorXd c_, h_, b_;
  int n_ = 0, p_ = 0, m_ = 0, nl_ = 0;
  std::vector<int> soc_dims_;
  std::vector<int> soc_row_;       // first compact row of each cone
  std::vector<int> expanded_row_;  // compact z row -> expanded KKT slot
  int me_ = 0;                     // expanded cone block size
  int dim_k_ = 0;

  Eigen::VectorXd x_equil_, a_equil_, g_equil_;

  Eigen::SparseMatrix<double> K_;
  Eigen::VectorXd reg_sign_;  // static regularization added per KKT row
  std::vector<double*> scaling_ptr_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Upper> ldlt_;
  bool analyzed_ = false;

  Eigen::VectorXd lp_w2_;  // orthant scaling s/z
  std::vector<SocScaling> soc_;

  Iterate it_, best_;
  Eigen::VectorXd rx_, ry_, rz_;
  double rt_ = 0.0, hresx_ = 0.0, hresy_ = 0.0, hresz_ = 0.0;
  double nx_ = 0.0, ny_ = 0.0, nz_ = 0.0, ns_ = 0.0;
  double resx0_ = 1.0, resy0_ = 1.0, resz0_ = 1.0;
  double cx_ = 0.0, by_ = 0.0, hz_ = 0.0;
};

}  // namespace stochopf
