#pragma once

#include <cstdint>
#include <vector>

#include "ssreg/additive.hpp"
#include "ssreg/dantzig.hpp"
#include "ssreg/dataset.hpp"
#include "ssreg/types.hpp"

namespace ssreg {

enum class XiVariant { plain, crossfit_optimal, safe_psi };

/// A score vector xi with its construction recorded for audit.
struct XiVector {
  Vector xi;
  XiVariant variant = XiVariant::plain;
  double psi = 0.0;
};

/// Cross-fitted estimate of the B matrix used by the safe path: column k
/// regresses X_k (Y - X'theta_L) on X m(X) - mu, averaged over the two folds.
struct BMatrix {
  Matrix b;                 // p x p, column k per target score coordinate
  Vector lambdas;           // per-column tuning values (fold average)
  Vector mu_hat_fold1;      // mu-hat^1
  Vector mu_hat_fold2;      // mu-hat^2
  bool degenerate_design = false;  // all covariates ~ zero (m-hat == 0)
};

/// (1/n) sum X_i Y_i over the labeled rows.
Vector labeled_score(const Dataset& dataset);

/// Cross-fitted xi: per fold j, the labeled score minus the labeled average
/// of X f-hat plus the pooled average of X f-hat; folds averaged.
XiVector xi_crossfit(const Dataset& dataset, const SplitPlan& plan,
                     const CrossFitPredictors& predictors);

/// Supervised Dantzig selector on (Sigma_n, labeled score).
SparseEstimate theta_L(const Dataset& dataset, double lambda);

/// Dantzig selector on the pooled Gram with the unmodified labeled score.
SparseEstimate theta_U(const Dataset& dataset, double lambda);

/// Optimal semi-supervised estimator: pooled Gram with cross-fitted xi.
SparseEstimate theta_D(const Dataset& dataset, const SplitPlan& plan,
                       const CrossFitPredictors& predictors, double lambda);

/// Safe semi-supervised sparse estimator: labeled Gram with xi_safe.
SparseEstimate theta_S(const Dataset& dataset, const SplitPlan& plan,
                       const CrossFitPredictors& m_predictors, const BMatrix& b, double psi,
                       double lambda);

/// Result of a cross-validated fit.
struct CvFit {
  double lambda = 0.0;
  SparseEstimate estimate;
};

CvFit theta_L_cv(const Dataset& dataset, int folds = 5, std::uint64_t seed = 1,
                 int grid_size = 30);
CvFit theta_U_cv(const Dataset& dataset, int folds = 5, std::uint64_t seed = 1,
                 int grid_size = 30);
CvFit theta_D_cv(const Dataset& dataset, const SplitPlan& plan,
                 const CrossFitPredictors& predictors, int folds = 5, std::uint64_t seed = 1,
                 int grid_size = 30);
CvFit theta_S_cv(const Dataset& dataset, const SplitPlan& plan,
                 const CrossFitPredictors& m_predictors, const BMatrix& b, double psi,
                 int folds = 5, std::uint64_t seed = 1, int grid_size = 30);

}  // namespace ssreg
