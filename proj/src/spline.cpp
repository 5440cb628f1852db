#include "ssreg/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ssreg {

namespace {

// Type-7 sample quantile (linear interpolation between order statistics).
double quantile(const std::vector<double>& sorted, double prob) {
  const std::size_t m = sorted.size();
  const double h = (static_cast<double>(m) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, m - 1);
  const double w = h - std::floor(h);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

constexpr int kDegree = 3;  // cubic

// Index of the knot span containing u (NURBS-book style, clamped vector).
int find_span(const std::vector<double>& knots, int df, double u) {
  const int order = kDegree + 1;
  int low = kDegree;        // first valid span start
  int high = df;            // one past the last valid span start
  if (u >= knots[static_cast<std::size_t>(df)]) return df - 1;
  if (u <= knots[static_cast<std::size_t>(kDegree)]) return kDegree;
  while (low + 1 < high) {
    const int mid = (low + high) / 2;
    if (u < knots[static_cast<std::size_t>(mid)]) {
      high = mid;
    } else {
      low = mid;
    }
  }
  (void)order;
  return low;
}

// Nonzero basis functions at u for span i (triangular table form of the
// Cox-de Boor recursion).
void basis_funs(const std::vector<double>& knots, int span, double u, double* out) {
  double left[kDegree + 1];
  double right[kDegree + 1];
  out[0] = 1.0;
  for (int j = 1; j <= kDegree; ++j) {
    left[j] = u - knots[static_cast<std::size_t>(span + 1 - j)];
    right[j] = knots[static_cast<std::size_t>(span + j)] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    out[j] = saved;
  }
}

}  // namespace

SplineBasis SplineBasis::fit(const Vector& x_train, int df) {
  if (df < 4) throw std::invalid_argument("spline: df must be >= 4");
  const Index m = x_train.size();
  if (m < df) throw std::invalid_argument("spline: insufficient points for basis");

  std::vector<double> sorted(x_train.data(), x_train.data() + m);
  std::sort(sorted.begin(), sorted.end());
  SplineBasis b;
  b.df = df;
  if (!(sorted.back() > sorted.front())) throw std::invalid_argument("spline: degenerate knots");

  // boundary knots sit 20% of the range beyond the observed extremes, so
  // moderately out-of-range inputs are covered by the basis; evaluation
  // clamps at these extended boundaries
  const double margin = 0.2 * (sorted.back() - sorted.front());
  b.lo = sorted.front() - margin;
  b.hi = sorted.back() + margin;

  const int n_interior = df - 4;
  b.knots.assign(4, b.lo);
  for (int i = 1; i <= n_interior; ++i) {
    b.knots.push_back(quantile(sorted, static_cast<double>(i) / (n_interior + 1)));
  }
  b.knots.insert(b.knots.end(), 4, b.hi);

  Matrix raw = b.eval_raw(x_train);
  b.col_means = raw.colwise().mean();
  return b;
}

Matrix SplineBasis::eval_raw(const Vector& x) const {
  const Index m = x.size();
  Matrix out = Matrix::Zero(m, df);
  double vals[kDegree + 1];
  for (Index i = 0; i < m; ++i) {
    const double u = std::clamp(x(i), lo, hi);
    const int span = find_span(knots, df, u);
    basis_funs(knots, span, u, vals);
    for (int j = 0; j <= kDegree; ++j) {
      out(i, span - kDegree + j) = vals[j];
    }
  }
  return out;
}

Matrix SplineBasis::eval(const Vector& x) const {
  Matrix out = eval_raw(x);
  out.rowwise() -= col_means.transpose();
  return out;
}

Matrix spline_basis(const Vector& x, int df) {
  SplineBasis b = SplineBasis::fit(x, df);
  return b.eval(x);
}

}  // namespace ssreg
