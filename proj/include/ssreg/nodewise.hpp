#pragma once

#include <cstdint>
#include <vector>

#include "ssreg/types.hpp"

namespace ssreg {

/// Nodewise-lasso precision matrix: Omega = T^{-2} C with per-row residual
/// regressions gamma_k and residual second moments tau_k^2.
struct PrecisionEstimate {
  Matrix omega;                // p x p
  std::vector<Vector> gammas;  // length p, each of length p with entry k forced to zero
  Vector taus_sq;              // p
  Vector lambdas;              // p

  /// (Omega + Omega') / 2, used inside quadratic forms.
  Matrix symmetrized() const { return 0.5 * (omega + omega.transpose()); }
};

/// Runs the per-column penalized regressions on the pooled design and
/// assembles Omega. Throws NumericError("degenerate nodewise residual") when
/// some tau_k^2 <= 0.
PrecisionEstimate nodewise_precision(const Matrix& x_pooled, const Vector& lambdas);

/// Per-row lambdas chosen by k-fold CV of the column regressions over a
/// geometric grid, then a final nodewise pass.
PrecisionEstimate nodewise_precision_cv(const Matrix& x_pooled, int folds, std::uint64_t seed,
                                        int grid_size = 30);

}  // namespace ssreg
