#include "ssreg/estimators.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ssreg/inference.hpp"
#include "ssreg/rng.hpp"
#include "ssreg/tuning.hpp"

namespace ssreg {

namespace {

Matrix second_moment_rows(const Matrix& x, const std::vector<int>& rows) {
  Matrix s = Matrix::Zero(x.cols(), x.cols());
  for (int i : rows) s.selfadjointView<Eigen::Lower>().rankUpdate(x.row(i).transpose());
  s.triangularView<Eigen::StrictlyUpper>() = s.adjoint();
  return s;
}

// Per labeled row i: y_i X_i and f-hat^{-j(i)}(X_i) X_i; per fold j the sum
// of f-hat^{-j}(X_u) X_u over unlabeled U_j.
struct ScoreParts {
  Matrix xy;       // n x p
  Matrix xf;       // n x p
  Vector uf_sum1;  // p
  Vector uf_sum2;  // p
};

ScoreParts score_parts(const Dataset& d, const SplitPlan& plan,
                       const CrossFitPredictors& preds) {
  ScoreParts parts;
  const Index n = d.n(), p = d.p();
  parts.xy.resize(n, p);
  parts.xf.resize(n, p);
  for (Index i = 0; i < n; ++i) {
    const int fold = plan.labeled_fold[static_cast<std::size_t>(i)];
    const double fhat = preds.for_fold(fold)(d.x_labeled.row(i));
    parts.xy.row(i) = d.y(i) * d.x_labeled.row(i);
    parts.xf.row(i) = fhat * d.x_labeled.row(i);
  }
  parts.uf_sum1 = Vector::Zero(p);
  parts.uf_sum2 = Vector::Zero(p);
  for (Index u = 0; u < d.N(); ++u) {
    const int fold = plan.unlabeled_fold[static_cast<std::size_t>(u)];
    const double fhat = preds.for_fold(fold)(d.x_unlabeled.row(u));
    if (fold == 1) {
      parts.uf_sum1 += fhat * d.x_unlabeled.row(u).transpose();
    } else {
      parts.uf_sum2 += fhat * d.x_unlabeled.row(u).transpose();
    }
  }
  return parts;
}

// Cross-fitted xi restricted to a subset of labeled rows (all rows for the
// full-sample estimate; CV training rows otherwise).
Vector xi_crossfit_on_rows(const Dataset& d, const SplitPlan& plan, const ScoreParts& parts,
                           const std::vector<int>& rows) {
  const Index p = d.p();
  Vector xi = Vector::Zero(p);
  for (int j = 1; j <= 2; ++j) {
    Vector sum_xy = Vector::Zero(p);
    Vector sum_xf = Vector::Zero(p);
    double nj = 0.0;
    for (int i : rows) {
      if (plan.labeled_fold[static_cast<std::size_t>(i)] != j) continue;
      sum_xy += parts.xy.row(i).transpose();
      sum_xf += parts.xf.row(i).transpose();
      nj += 1.0;
    }
    if (nj == 0.0) throw NumericError("xi_crossfit: empty labeled fold in subset");
    const double Nj = static_cast<double>(plan.N_fold(j));
    const Vector& uf = (j == 1) ? parts.uf_sum1 : parts.uf_sum2;
    Vector xi_j = sum_xy / nj - sum_xf / nj + (sum_xf + uf) / (nj + Nj);
    xi += 0.5 * xi_j;
  }
  return xi;
}

std::vector<int> all_rows(Index n) {
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = static_cast<int>(i);
  return rows;
}

void require_centered(const Dataset& d, const char* who) {
  if (!d.centered) throw std::invalid_argument(std::string(who) + ": dataset must be centered");
}

// Generic CV driver for score-based Dantzig estimators: the score maker maps
// the CV training rows to a (sigma, xi) pair; the path is solved warm-started
// down the grid.
using ScoreMaker =
    std::function<std::pair<Matrix, Vector>(const std::vector<int>& train_rows)>;

CvFit dantzig_cv(const Dataset& d, const ScoreMaker& make, double lambda_max, int folds,
                 std::uint64_t seed, int grid_size) {
  CvFit out;
  if (!(lambda_max > 0)) {
    auto [sigma, xi] = make(all_rows(d.n()));
    out.lambda = 0.0;
    out.estimate = dantzig_lp(sigma, xi, 0.0);
    return out;
  }
  std::vector<double> grid = geometric_grid(lambda_max, grid_size);
  PathFitter fitter = [&](const std::vector<int>& train, const std::vector<double>& g) {
    auto [sigma, xi] = make(train);
    DantzigPath path(std::move(sigma), std::move(xi));
    Matrix coefs(d.p(), static_cast<Index>(g.size()));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < g.size(); ++k) {
      try {
        coefs.col(static_cast<Index>(k)) = path.solve(g[k]).coef;
      } catch (const NumericError&) {
        // the feasible set shrinks with lambda: this and all smaller grid
        // points are infeasible for a singular training gram
        for (std::size_t rest = k; rest < g.size(); ++rest) {
          coefs.col(static_cast<Index>(rest)).setConstant(nan);
        }
        break;
      }
    }
    return coefs;
  };
  out.lambda = cv_tune(fitter, d.x_labeled, d.y, grid, folds, seed);
  auto [sigma, xi] = make(all_rows(d.n()));
  // the chosen lambda was feasible on every training fold; on rare occasions
  // the full-sample problem is still infeasible there, so back off to the
  // next larger grid value
  std::size_t idx = 0;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    if (grid[gi] == out.lambda) {
      idx = gi;
      break;
    }
  }
  for (std::size_t step = 0; step <= idx; ++step) {
    const std::size_t gi = idx - step;
    try {
      out.estimate = dantzig_lp(sigma, xi, grid[gi]);
      out.lambda = grid[gi];
      return out;
    } catch (const NumericError&) {
      continue;
    }
  }
  throw NumericError("dantzig cv: no feasible lambda for the full sample");
}

}  // namespace

Vector labeled_score(const Dataset& dataset) {
  return dataset.x_labeled.transpose() * dataset.y / static_cast<double>(dataset.n());
}

XiVector xi_crossfit(const Dataset& dataset, const SplitPlan& plan,
                     const CrossFitPredictors& predictors) {
  require_centered(dataset, "xi_crossfit");
  predictors.check_plan(plan);
  if (static_cast<Index>(plan.labeled_fold.size()) != dataset.n() ||
      static_cast<Index>(plan.unlabeled_fold.size()) != dataset.N()) {
    throw std::invalid_argument("xi_crossfit: plan does not match dataset");
  }
  ScoreParts parts = score_parts(dataset, plan, predictors);
  XiVector out;
  out.variant = XiVariant::crossfit_optimal;
  out.xi = xi_crossfit_on_rows(dataset, plan, parts, all_rows(dataset.n()));
  return out;
}

SparseEstimate theta_L(const Dataset& dataset, double lambda) {
  require_centered(dataset, "theta_L");
  GramPair g = gram(dataset);
  return dantzig_lp(g.sigma_n, labeled_score(dataset), lambda);
}

SparseEstimate theta_U(const Dataset& dataset, double lambda) {
  require_centered(dataset, "theta_U");
  GramPair g = gram(dataset);
  return dantzig_lp(g.sigma_pooled, labeled_score(dataset), lambda);
}

SparseEstimate theta_D(const Dataset& dataset, const SplitPlan& plan,
                       const CrossFitPredictors& predictors, double lambda) {
  require_centered(dataset, "theta_D");
  GramPair g = gram(dataset);
  XiVector xi = xi_crossfit(dataset, plan, predictors);
  return dantzig_lp(g.sigma_pooled, xi.xi, lambda);
}

SparseEstimate theta_S(const Dataset& dataset, const SplitPlan& plan,
                       const CrossFitPredictors& m_predictors, const BMatrix& b, double psi,
                       double lambda) {
  require_centered(dataset, "theta_S");
  GramPair g = gram(dataset);
  XiVector xi = xi_safe(dataset, plan, m_predictors, b, psi);
  return dantzig_lp(g.sigma_n, xi.xi, lambda);
}

CvFit theta_L_cv(const Dataset& d, int folds, std::uint64_t seed, int grid_size) {
  require_centered(d, "theta_L_cv");
  Matrix xy = d.x_labeled.array().colwise() * d.y.array();
  ScoreMaker make = [&](const std::vector<int>& rows) {
    Matrix sigma = second_moment_rows(d.x_labeled, rows) / static_cast<double>(rows.size());
    Vector xi = Vector::Zero(d.p());
    for (int i : rows) xi += xy.row(i).transpose();
    xi /= static_cast<double>(rows.size());
    return std::make_pair(std::move(sigma), std::move(xi));
  };
  const double lmax = labeled_score(d).cwiseAbs().maxCoeff();
  return dantzig_cv(d, make, lmax, folds, seed, grid_size);
}

CvFit theta_U_cv(const Dataset& d, int folds, std::uint64_t seed, int grid_size) {
  require_centered(d, "theta_U_cv");
  Matrix xy = d.x_labeled.array().colwise() * d.y.array();
  Matrix s_unl = d.N() > 0 ? second_moment_rows(d.x_unlabeled, all_rows(d.N()))
                           : Matrix::Zero(d.p(), d.p()).eval();
  const double N = static_cast<double>(d.N());
  ScoreMaker make = [&, s_unl](const std::vector<int>& rows) {
    Matrix sigma = (second_moment_rows(d.x_labeled, rows) + s_unl) /
                   (static_cast<double>(rows.size()) + N);
    Vector xi = Vector::Zero(d.p());
    for (int i : rows) xi += xy.row(i).transpose();
    xi /= static_cast<double>(rows.size());
    return std::make_pair(std::move(sigma), std::move(xi));
  };
  const double lmax = labeled_score(d).cwiseAbs().maxCoeff();
  return dantzig_cv(d, make, lmax, folds, seed, grid_size);
}

CvFit theta_D_cv(const Dataset& d, const SplitPlan& plan, const CrossFitPredictors& predictors,
                 int folds, std::uint64_t seed, int grid_size) {
  require_centered(d, "theta_D_cv");
  predictors.check_plan(plan);
  ScoreParts parts = score_parts(d, plan, predictors);
  Matrix s_unl = d.N() > 0 ? second_moment_rows(d.x_unlabeled, all_rows(d.N()))
                           : Matrix::Zero(d.p(), d.p()).eval();
  const double N = static_cast<double>(d.N());
  ScoreMaker make = [&, s_unl](const std::vector<int>& rows) {
    Matrix sigma = (second_moment_rows(d.x_labeled, rows) + s_unl) /
                   (static_cast<double>(rows.size()) + N);
    Vector xi = xi_crossfit_on_rows(d, plan, parts, rows);
    return std::make_pair(std::move(sigma), std::move(xi));
  };
  const double lmax = xi_crossfit_on_rows(d, plan, parts, all_rows(d.n())).cwiseAbs().maxCoeff();
  return dantzig_cv(d, make, lmax, folds, seed, grid_size);
}

CvFit theta_S_cv(const Dataset& d, const SplitPlan& plan, const CrossFitPredictors& m_predictors,
                 const BMatrix& b, double psi, int folds, std::uint64_t seed, int grid_size) {
  require_centered(d, "theta_S_cv");
  m_predictors.check_plan(plan);
  // xm_i = m-hat^{-j(i)}(X_i) X_i, plus per-fold unlabeled sums
  ScoreParts parts;  // reuse: xf holds xm, xy holds y X
  parts = score_parts(d, plan, m_predictors);
  ScoreMaker make = [&](const std::vector<int>& rows) {
    Matrix sigma = second_moment_rows(d.x_labeled, rows) / static_cast<double>(rows.size());
    Vector xy_avg = Vector::Zero(d.p());
    for (int i : rows) xy_avg += parts.xy.row(i).transpose();
    xy_avg /= static_cast<double>(rows.size());
    Vector corr = Vector::Zero(d.p());
    for (int j = 1; j <= 2; ++j) {
      Vector lab = Vector::Zero(d.p());
      double nj = 0.0;
      for (int i : rows) {
        if (plan.labeled_fold[static_cast<std::size_t>(i)] != j) continue;
        lab += parts.xf.row(i).transpose();
        nj += 1.0;
      }
      if (nj == 0.0) throw NumericError("theta_S_cv: empty labeled fold in subset");
      const double Nj = static_cast<double>(plan.N_fold(j));
      const Vector& um = (j == 1) ? parts.uf_sum1 : parts.uf_sum2;
      corr += lab / nj - (lab + um) / (nj + Nj);
    }
    Vector xi = xy_avg - 0.5 * psi * (b.b.transpose() * corr);
    return std::make_pair(std::move(sigma), std::move(xi));
  };
  XiVector xi_full = xi_safe(d, plan, m_predictors, b, psi);
  const double lmax = xi_full.xi.cwiseAbs().maxCoeff();
  return dantzig_cv(d, make, lmax, folds, seed, grid_size);
}

}  // namespace ssreg
