#pragma once

#include <cstdint>
#include <vector>

#include "ssreg/types.hpp"

namespace ssreg {

/// Labeled design/response plus unlabeled design with centering metadata.
///
/// Column means are taken over all n+N rows, the response mean over labeled
/// rows only. `x_scales` holds per-column divisors when unit-variance scaling
/// was requested (all ones otherwise).
struct Dataset {
  Matrix x_labeled;    // n x p
  Vector y;            // n
  Matrix x_unlabeled;  // N x p, N >= 0
  Vector x_means;      // p
  Vector x_scales;     // p
  double y_mean = 0.0;
  bool centered = false;

  Index n() const { return x_labeled.rows(); }
  Index N() const { return x_unlabeled.rows(); }
  Index p() const { return x_labeled.cols(); }

  /// Checks the structural invariants (dimensions, centering tolerances).
  /// Throws std::invalid_argument on violation.
  void validate() const;
};

/// Builds a dataset from raw matrices; unlabeled may be empty (0 x p).
Dataset make_dataset(Matrix x_labeled, Vector y, Matrix x_unlabeled = Matrix());

/// Centers X by pooled column means (all n+N rows) and Y by its labeled mean.
/// With `standardize`, columns are additionally scaled to unit pooled standard
/// deviation; use unscale_coef to map estimates back.
Dataset center(const Dataset& dataset, bool standardize = false);

/// Maps a coefficient vector fitted on the scaled data back to the original
/// column scale.
Vector unscale_coef(const Dataset& dataset, const Vector& coef);

/// Two-fold cross-fitting assignment; fold labels are 1 or 2.
struct SplitPlan {
  std::vector<int> labeled_fold;    // length n
  std::vector<int> unlabeled_fold;  // length N
  std::uint64_t seed = 0;

  std::vector<int> labeled_indices(int fold) const;
  std::vector<int> unlabeled_indices(int fold) const;
  Index n_fold(int fold) const;
  Index N_fold(int fold) const;
};

/// Balanced random two-fold split, deterministic in `seed`.
SplitPlan make_split(Index n, Index N, std::uint64_t seed);

/// Labeled and pooled second-moment matrices.
struct GramPair {
  Matrix sigma_n;       // (1/n) X'X over labeled rows
  Matrix sigma_pooled;  // (1/(n+N)) X'X over all rows
};

/// Requires a centered dataset. When N = 0 the two matrices are identical.
GramPair gram(const Dataset& dataset);

}  // namespace ssreg
