#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssreg/additive.hpp"
#include "ssreg/dataset.hpp"
#include "ssreg/estimators.hpp"
#include "ssreg/nodewise.hpp"
#include "ssreg/types.hpp"

namespace ssreg {

/// One confidence interval / test for a linear functional v' theta.
struct InferenceResult {
  Vector target;  // contrast v
  double point = 0.0;
  double sd = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double z_stat = 0.0;
  double p_value = 1.0;
  std::string method;
};

/// Variance building blocks for the efficient path (sigma^2, Gamma) and the
/// safe path (M1, M2, Gamma_psi with its symmetrized copy).
struct VarianceComponents {
  double sigma_sq_hat = 0.0;
  Matrix gamma_hat;  // efficient-path Gamma or safe-path Gamma_psi (raw)
  Matrix gamma_sym;  // symmetrized copy used in quadratic forms
  Matrix m1_hat;
  Matrix m2_hat;
  double psi = 0.0;
};

/// One-step corrected estimator theta_D + Omega (xi - Sigma_pooled theta_D).
Vector debias_efficient(const Dataset& dataset, const SplitPlan& plan,
                        const CrossFitPredictors& predictors, const SparseEstimate& theta_d,
                        const PrecisionEstimate& omega);

/// Cross-fitted residual variance: average over folds of the fold mean of
/// (Y - f-hat^{-j}(X))^2.
double sigma_sq_hat(const Dataset& dataset, const SplitPlan& plan,
                    const CrossFitPredictors& predictors);

/// Cross-fitted Gamma-hat: fold averages of eta^2 (Omega X)(Omega X)' over
/// labeled and unlabeled fold rows, eta = f-hat^{-j}(X) - theta_D' X.
Matrix gamma_hat(const Dataset& dataset, const SplitPlan& plan,
                 const CrossFitPredictors& predictors, const SparseEstimate& theta_d,
                 const PrecisionEstimate& omega);

/// sd for the efficient path: sqrt(v'(sigma^2 Omega_sym + n/(n+N) Gamma) v).
double variance_efficient(const VarianceComponents& components, const PrecisionEstimate& omega,
                          const Vector& v, Index n, Index N);

/// Cross-fitted estimate of B; per-column lambdas by CV over the grid
/// (a geometric per-column default when empty). With pooled_mu the centering
/// vector mu-hat uses labeled and unlabeled fold rows.
BMatrix estimate_B(const Dataset& dataset, const SplitPlan& plan,
                   const CrossFitPredictors& m_predictors, const SparseEstimate& theta_l,
                   const std::vector<double>& lambda_grid = {}, int folds = 5,
                   std::uint64_t seed = 1, bool pooled_mu = false);

/// Safe-path xi: labeled score minus (psi/2) B' times the fold gaps between
/// labeled-only and pooled averages of X m-hat.
XiVector xi_safe(const Dataset& dataset, const SplitPlan& plan,
                 const CrossFitPredictors& m_predictors, const BMatrix& b, double psi);

/// Safe one-step estimator theta_L + Omega (xi_safe - Sigma_n theta_L).
Vector debias_safe(const Dataset& dataset, const SplitPlan& plan,
                   const CrossFitPredictors& m_predictors, const SparseEstimate& theta_l,
                   const BMatrix& b, const PrecisionEstimate& omega, double psi);

/// M1, M2 and Gamma_psi = M1 - N(2 psi - psi^2)/(n+N) B' M2.
VarianceComponents gamma_psi_hat(const Dataset& dataset, const SplitPlan& plan,
                                 const CrossFitPredictors& m_predictors,
                                 const SparseEstimate& theta_l, const BMatrix& b, double psi);

/// sd for the safe path: sqrt(v' Omega Gamma_sym Omega' v).
double variance_safe(const VarianceComponents& components, const PrecisionEstimate& omega,
                     const Vector& v);

/// CI endpoints point -/+ z_{1-alpha/2} sd / sqrt(n), z statistic and
/// two-sided p-value.
InferenceResult ci_and_test(double point, double sd, Index n, double alpha, Vector target = {},
                            std::string method = {});

/// Step-down Holm adjustment, returned in input order.
std::vector<double> holm_adjust(const std::vector<double>& p_values);

/// theta_init + Omega (labeled score - Sigma_n theta_init).
Vector debias_supervised(const Dataset& dataset, const Vector& theta_init, const Matrix& omega);

enum class BaselineVariant { labeled_nodewise, pooled_nodewise };

struct BaselineFit {
  Vector theta_debiased;
  SparseEstimate lasso;
  PrecisionEstimate omega;
};

/// Debiased-lasso baselines: lasso initial estimate plus one-step correction,
/// with Omega from labeled-only or pooled nodewise lasso.
BaselineFit debias_baseline(const Dataset& dataset, BaselineVariant variant, double lambda_lasso,
                            const Vector& lambdas_nodewise);

/// K-hat = (1/n) sum (Y - X'theta)^2 X X'.
Matrix sandwich_k(const Dataset& dataset, const Vector& theta);

/// Baseline sandwich sd: sqrt(v' Omega K Omega' v).
double baseline_sd(const Dataset& dataset, const Matrix& omega, const Vector& theta_lasso,
                   const Vector& v);

}  // namespace ssreg
