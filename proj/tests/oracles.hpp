#pragma once

// Test-only reference implementations, independent of the library's solvers.

#include <vector>

#include "ssreg/lasso.hpp"
#include "ssreg/types.hpp"

namespace ssreg::oracle {

struct LpSolution {
  bool feasible = false;
  double objective = 0.0;
  Vector x;
};

/// Generic dense two-phase tableau simplex for min c'x s.t. A x <= b, x >= 0.
LpSolution simplex_lp(const Matrix& a, const Vector& b, const Vector& c);

/// Dantzig selector objective via the generic simplex on the explicit
/// 2p-constraint split formulation.
LpSolution dantzig_reference(const Matrix& sigma, const Vector& xi, double lambda);

/// Lasso objective value (1/2n)||y - X b||^2 + lambda ||b||_1.
double lasso_objective(const Matrix& x, const Vector& y, const Vector& beta, double lambda);

/// Group lasso objective value.
double group_objective(const Matrix& x, const Vector& y, const GroupSpec& spec,
                       const Vector& beta, double lambda);

/// Long-horizon accelerated proximal gradient for the lasso; returns the best
/// objective value reached.
double prox_lasso_best(const Matrix& x, const Vector& y, double lambda, long max_iters = 1000000);

/// Long-horizon accelerated proximal gradient for the group lasso.
double prox_group_best(const Matrix& x, const Vector& y, const GroupSpec& spec, double lambda,
                       long max_iters = 1000000);

/// Naive recursive Cox-de Boor evaluation of B-spline basis function i of
/// order k (degree k-1) on knot vector t; the rightmost interval is closed.
double deboor_basis(const std::vector<double>& t, int i, int k, double u);

}  // namespace ssreg::oracle
