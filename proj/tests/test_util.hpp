#pragma once

#include "ssreg/rng.hpp"
#include "ssreg/types.hpp"

namespace ssreg::testutil {

inline Matrix random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

inline Vector random_vector(Rng& rng, Index size, double scale = 1.0) {
  Vector v(size);
  for (Index i = 0; i < size; ++i) v(i) = scale * rng.normal();
  return v;
}

/// Random PSD matrix G = A'A / rows (possibly singular when rows < p).
inline Matrix random_psd(Rng& rng, Index p, Index rows) {
  Matrix a = random_matrix(rng, rows, p);
  return a.transpose() * a / static_cast<double>(rows);
}

}  // namespace ssreg::testutil
