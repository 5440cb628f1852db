#pragma once

#include <vector>

#include "ssreg/types.hpp"

namespace ssreg {

/// Cubic B-spline basis with df basis functions: df - 4 interior knots placed
/// at equally spaced quantiles of the training sample, clamped boundary knots
/// at the training range. Inputs outside the range are clamped before
/// evaluation. Columns are centered by their training means in eval().
struct SplineBasis {
  int df = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> knots;  // clamped knot vector, length df + 4
  Vector col_means;           // training column means

  /// Builds knots from x_train quantiles and records training column means.
  /// Requires df >= 4 and x_train.size() >= df; throws on constant input
  /// ("degenerate knots") or too few points ("insufficient points for basis").
  static SplineBasis fit(const Vector& x_train, int df);

  /// Raw (uncentered) basis; row sums are 1 by the partition of unity.
  Matrix eval_raw(const Vector& x) const;

  /// Training-mean-centered basis.
  Matrix eval(const Vector& x) const;
};

/// Convenience: fit on x then return the centered basis at x.
Matrix spline_basis(const Vector& x, int df);

}  // namespace ssreg
