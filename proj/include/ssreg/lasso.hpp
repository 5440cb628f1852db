#pragma once

#include <memory>
#include <vector>

#include "ssreg/types.hpp"

namespace ssreg {

/// Minimizes (1/2n)||y - X b||^2 + lambda ||b||_1 by cyclic coordinate
/// descent. Convergence: max coefficient change <= 1e-9 or 1e5 sweeps.
SparseEstimate lasso_cd(const Matrix& design, const Vector& response, double lambda);

/// Gram-form lasso: minimizes (1/2) b'G b - c'b + lambda ||b||_1 with
/// G = X'X/n and c = X'y/n. `warm` seeds the solution when given.
/// `skip` (if >= 0) freezes that coordinate at zero (nodewise regressions).
/// `kkt_abs` (> 0) additionally stops once the KKT residual falls below it;
/// rank-deficient problems reach a tight KKT residual long before the
/// coefficients settle on the optimal face.
SparseEstimate lasso_cd_gram(const Matrix& gram, const Vector& c, double lambda,
                             const Vector* warm = nullptr, Index skip = -1,
                             double kkt_abs = 0.0);

/// Warm-started solution path over a non-increasing lambda grid.
/// Returns q x grid.size() coefficients. `tol`/`max_sweeps` control the
/// per-point stopping rule; CV searches may use a coarser tolerance than the
/// 1e-9 contract used for final fits.
Matrix lasso_path_gram(const Matrix& gram, const Vector& c, const std::vector<double>& grid,
                       Index skip = -1, double tol = 1e-9, int max_sweeps = 100000);

/// Resumable warm-started path: step() solves at the given lambda starting
/// from the previous solution. Callers walking a descending grid can stop
/// early (e.g. when a CV loss curve turns upward). The gram matrix must
/// outlive the state.
class LassoPathState {
 public:
  LassoPathState(const Matrix& gram, const Vector& c, Index skip = -1, double tol = 1e-7,
                 int max_sweeps = 100000);
  ~LassoPathState();
  LassoPathState(LassoPathState&&) noexcept;

  const Vector& step(double lambda);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// KKT residual of the lasso problem at `coef` (subgradient convention).
double lasso_kkt_residual(const Matrix& design, const Vector& response, const Vector& coef,
                          double lambda);

/// Disjoint column groups with per-group penalty multipliers.
struct GroupSpec {
  std::vector<std::vector<int>> groups;
  std::vector<double> weights;

  /// Verifies the groups partition {0..q-1} and weights are positive.
  void validate(Index q) const;
};

/// Minimizes (1/2n)||y - X b||^2 + lambda sum_g w_g ||b_g||_2 by block
/// coordinate descent with exact per-block minimization.
SparseEstimate group_lasso(const Matrix& design, const Vector& response, const GroupSpec& spec,
                           double lambda);

/// Warm-started group-lasso path on a non-increasing grid (gram form built
/// internally once). Returns q x grid.size() coefficients.
Matrix group_lasso_path(const Matrix& design, const Vector& response, const GroupSpec& spec,
                        const std::vector<double>& grid);

/// Blockwise KKT residual of the group-lasso problem at `coef`.
double group_kkt_residual(const Matrix& design, const Vector& response, const GroupSpec& spec,
                          const Vector& coef, double lambda);

}  // namespace ssreg
