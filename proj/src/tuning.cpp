#include "ssreg/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ssreg/rng.hpp"

namespace ssreg {

std::vector<double> geometric_grid(double lambda_max, int size, double ratio_min) {
  if (size < 1) throw std::invalid_argument("geometric_grid: size must be >= 1");
  if (!(lambda_max > 0)) throw std::invalid_argument("geometric_grid: lambda_max must be positive");
  std::vector<double> grid(static_cast<std::size_t>(size));
  if (size == 1) {
    grid[0] = lambda_max;
    return grid;
  }
  const double log_hi = std::log(lambda_max);
  const double log_lo = std::log(lambda_max * ratio_min);
  for (int i = 0; i < size; ++i) {
    grid[static_cast<std::size_t>(i)] =
        std::exp(log_hi + (log_lo - log_hi) * static_cast<double>(i) / (size - 1));
  }
  return grid;
}

std::vector<int> cv_fold_assignment(Index m, int folds, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::mix(seed, 0xcf1d));
  rng.shuffle(order);
  std::vector<int> fold_of(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
        static_cast<int>(i % folds);
  }
  return fold_of;
}

double cv_tune(const PathFitter& fit, const Matrix& x_labeled, const Vector& y,
               const std::vector<double>& grid, int folds, std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("cv_tune: empty lambda grid");
  for (double l : grid) {
    if (!std::isfinite(l)) throw std::invalid_argument("cv_tune: non-finite lambda in grid");
  }
  if (folds < 2) throw std::invalid_argument("cv_tune: folds must be >= 2");
  const Index n = x_labeled.rows();
  if (n < folds) throw std::invalid_argument("cv_tune: fewer rows than folds");

  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());

  std::vector<int> fold_of = cv_fold_assignment(n, folds, seed);
  std::vector<double> sse(sorted.size(), 0.0);
  std::vector<char> valid(sorted.size(), 1);  // NaN path columns mark infeasible points
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train;
    std::vector<int> test;
    for (Index i = 0; i < n; ++i) {
      if (fold_of[static_cast<std::size_t>(i)] == f) {
        test.push_back(static_cast<int>(i));
      } else {
        train.push_back(static_cast<int>(i));
      }
    }
    Matrix path = fit(train, sorted);
    for (std::size_t gi = 0; gi < sorted.size(); ++gi) {
      const Vector coef = path.col(static_cast<Index>(gi));
      if (!coef.allFinite()) {
        valid[gi] = 0;
        continue;
      }
      for (int i : test) {
        const double r = y(i) - x_labeled.row(i).dot(coef);
        sse[gi] += r * r;
      }
    }
  }
  std::size_t best = sorted.size();
  for (std::size_t gi = 0; gi < sorted.size(); ++gi) {
    if (!valid[gi]) continue;
    if (best == sorted.size() || sse[gi] < sse[best]) best = gi;  // ties keep the larger lambda
  }
  if (best == sorted.size()) throw NumericError("cv_tune: no usable lambda in the grid");
  return sorted[best];
}

BicResult bic_select(const Matrix& design, const Vector& response, const GroupSpec& spec,
                     const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("bic_select: empty lambda grid");
  spec.validate(design.cols());
  const double n = static_cast<double>(design.rows());

  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  Matrix path = group_lasso_path(design, response, spec, sorted);

  BicResult out;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_gi = sorted.size();
  bool underflow_at_best = false;
  for (std::size_t gi = 0; gi < sorted.size(); ++gi) {
    const Vector coef = path.col(static_cast<Index>(gi));
    std::vector<int> active_cols;
    double df = 0.0;
    for (const auto& g : spec.groups) {
      bool active = false;
      for (int j : g) {
        if (coef(j) != 0.0) {
          active = true;
          break;
        }
      }
      if (active) {
        df += static_cast<double>(g.size());
        for (int j : g) active_cols.push_back(j);
      }
    }
    // refit RSS is in-sample: near saturation it turns optimistic, so such
    // candidates are skipped
    if (static_cast<double>(active_cols.size()) > 0.7 * n) continue;

    double rss;
    if (active_cols.empty()) {
      rss = response.squaredNorm();
    } else {
      Eigen::VectorXi ix(static_cast<Index>(active_cols.size()));
      for (std::size_t k = 0; k < active_cols.size(); ++k) ix(static_cast<Index>(k)) = active_cols[k];
      Matrix sub = design(Eigen::all, ix);
      Matrix gram_sub = sub.transpose() * sub;
      // light ridge keeps thinly supported basis directions from exploding
      const double ridge = 1e-2 * gram_sub.trace() / static_cast<double>(gram_sub.rows());
      gram_sub.diagonal().array() += ridge;
      Vector refit = gram_sub.ldlt().solve(sub.transpose() * response);
      rss = (response - sub * refit).squaredNorm();
    }
    double mean_rss = rss / n;
    bool underflow = false;
    if (mean_rss < std::numeric_limits<double>::epsilon()) {
      mean_rss = std::numeric_limits<double>::epsilon();
      underflow = true;
    }
    const double bic = std::log(mean_rss) + df * std::log(n) / n;
    if (bic < best) {
      best = bic;
      best_gi = gi;
      underflow_at_best = underflow;
    }
  }
  if (best_gi == sorted.size()) throw NumericError("bic_select: no admissible lambda in grid");
  out.lambda = sorted[best_gi];
  out.rss_underflow = underflow_at_best;
  out.coef = path.col(static_cast<Index>(best_gi));
  out.converged =
      group_kkt_residual(design, response, spec, out.coef, out.lambda) <= 1e-6;
  out.refit_coef = Vector::Zero(design.cols());
  std::vector<int> chosen_cols;
  for (const auto& g : spec.groups) {
    bool active = false;
    for (int j : g) {
      if (out.coef(j) != 0.0) active = true;
    }
    if (active) {
      for (int j : g) chosen_cols.push_back(j);
    }
  }
  if (!chosen_cols.empty()) {
    Eigen::VectorXi ix(static_cast<Index>(chosen_cols.size()));
    for (std::size_t k = 0; k < chosen_cols.size(); ++k) ix(static_cast<Index>(k)) = chosen_cols[k];
    Matrix sub = design(Eigen::all, ix);
    Matrix gram_sub = sub.transpose() * sub;
    const double ridge = 1e-2 * gram_sub.trace() / static_cast<double>(gram_sub.rows());
    gram_sub.diagonal().array() += ridge;
    Vector refit = gram_sub.ldlt().solve(sub.transpose() * response);
    for (std::size_t k = 0; k < chosen_cols.size(); ++k) {
      out.refit_coef(chosen_cols[k]) = refit(static_cast<Index>(k));
    }
  }
  return out;
}

}  // namespace ssreg
