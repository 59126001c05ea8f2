#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace stochopf {

/// Sparse affine expression in decision variables: constant + sum of
/// coeff * var. Terms stay sorted by variable id with no duplicates.
struct LinExpr {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  LinExpr() = default;
  explicit LinExpr(double c) : constant(c) {}

  static LinExpr variable(int id, double coeff = 1.0) {
    LinExpr e;
    if (coeff != 0.0) e.terms.emplace_back(id, coeff);
    return e;
  }

  bool is_constant() const { return terms.empty(); }
  bool is_zero() const { return terms.empty() && constant == 0.0; }

  void add_term(int id, double coeff);
  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator-=(const LinExpr& o);
  LinExpr& operator*=(double f);

  friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
  friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
  friend LinExpr operator*(double f, LinExpr e) { return e *= f; }

  double eval(const Eigen::VectorXd& x) const {
    double v = constant;
    for (const auto& [id, c] : terms) v += c * x(id);
    return v;
  }
};

}  // namespace stochopf
