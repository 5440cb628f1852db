#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ssreg/lasso.hpp"
#include "ssreg/types.hpp"

namespace ssreg {

/// Geometric grid of `size` points from lambda_max down to ratio_min * lambda_max.
std::vector<double> geometric_grid(double lambda_max, int size = 30, double ratio_min = 0.01);

/// Fits the whole grid on a subset of labeled rows; returns q x grid.size().
using PathFitter =
    std::function<Matrix(const std::vector<int>& train_rows, const std::vector<double>& grid)>;

/// K-fold cross-validation over a lambda grid. Loss is held-out prediction
/// squared error of X theta against y, pooled over folds. Ties break toward
/// the larger lambda (the grid is sorted descending internally).
double cv_tune(const PathFitter& fit, const Matrix& x_labeled, const Vector& y,
               const std::vector<double>& grid, int folds, std::uint64_t seed);

struct BicResult {
  double lambda = 0.0;
  bool rss_underflow = false;
  Vector coef;        // group-lasso solution at the chosen lambda
  Vector refit_coef;  // least-squares refit on the chosen active groups
  bool converged = false;
};

/// BIC selection for the group lasso over a lambda grid:
/// log(RSS/n) + df log(n)/n with df = total coefficient count in active groups.
/// The RSS of a candidate is that of the least-squares refit on its active
/// groups (the shrunken RSS of the penalized fit would make the null model win
/// far too often at small n); candidates whose active coefficient count
/// reaches n are skipped as saturated. The returned coefficients are the
/// penalized group-lasso fit at the chosen lambda.
BicResult bic_select(const Matrix& design, const Vector& response, const GroupSpec& spec,
                     const std::vector<double>& grid);

/// Deterministic k-fold assignment of m rows; returns fold id per row.
std::vector<int> cv_fold_assignment(Index m, int folds, std::uint64_t seed);

}  // namespace ssreg
