#pragma once

#include <cstdint>
#include <vector>

#include "ssreg/types.hpp"

namespace ssreg {

/// Dantzig selector: minimizes ||theta||_1 subject to
/// ||sigma theta - xi||_inf <= lambda, via the split theta = theta+ - theta-
/// solved as a linear program.
SparseEstimate dantzig_lp(const Matrix& sigma, const Vector& xi, double lambda);

/// Warm-started solver for a sequence of lambdas on a fixed (sigma, xi).
/// Intended for non-increasing lambda sequences (CV grids); any order is
/// accepted. The slack basis is dual feasible for every lambda, so each call
/// restores primal feasibility with the dual simplex from the previous basis.
class DantzigPath {
 public:
  DantzigPath(Matrix sigma, Vector xi);

  SparseEstimate solve(double lambda);

 private:
  enum class Status : std::uint8_t { Basic, AtLower, AtUpper };

  Index p_;
  Matrix sigma_;
  Vector xi_;
  double lambda_ = 0.0;
  double tol_primal_ = 1e-11;

  std::vector<Index> basis_;    // variable basic in each row
  std::vector<Status> status_;  // all 3p variables
  Matrix binv_;
  Vector xb_;
  Vector d_;  // reduced costs
  long pivots_total_ = 0;

  double upper(Index var) const;
  Vector column(Index var) const;
  void reset_basis();
  void refactorize();
  void recompute_xb();
  void recompute_d();
  Index worst_violation(double* amount, bool bland) const;
  void pivot_row(Index r, Vector& alpha) const;
  bool dual_iterate(Index r, const Vector& alpha, bool bland);
  SparseEstimate extract() const;
};

}  // namespace ssreg
