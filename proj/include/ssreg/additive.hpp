#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ssreg/dataset.hpp"
#include "ssreg/spline.hpp"
#include "ssreg/types.hpp"

namespace ssreg {

/// A fitted conditional-mean predictor evaluated on a single covariate row.
using Predictor = std::function<double(const Eigen::Ref<const RowVec>&)>;

/// Sparse additive model: per-coordinate cubic spline blocks selected by
/// group lasso. Coordinates outside the active set contribute exactly zero.
struct AdditiveModel {
  int df = 0;
  std::vector<SplineBasis> bases;  // one per active coordinate
  std::vector<int> active;         // coordinate index per basis
  std::vector<Vector> coef;        // df-length block per active coordinate
  double offset = 0.0;
  double lambda = 0.0;
  bool converged = true;
  bool rss_underflow = false;

  double predict_one(const Eigen::Ref<const RowVec>& x) const;
  Vector predict(const Matrix& x) const;
  Predictor predictor() const;

  /// The zero predictor (empty active set, zero offset).
  static AdditiveModel zero();
};

/// Fits the additive model with per-coordinate df-column spline groups;
/// lambda chosen by BIC over the grid (a geometric default when empty).
AdditiveModel fit_additive(const Matrix& x, const Vector& y, int df,
                           std::vector<double> lambda_grid = {});

/// Cross-fitted conditional-mean predictors: pred(j) was trained without any
/// sample of labeled fold j.
struct CrossFitPredictors {
  AdditiveModel model_fold1;  // trained on D* \ D*_1
  AdditiveModel model_fold2;  // trained on D* \ D*_2
  Predictor pred1;
  Predictor pred2;
  std::uint64_t plan_seed = 0;
  Index n_labeled = 0;
  Index n_unlabeled = 0;

  const Predictor& for_fold(int fold) const { return fold == 1 ? pred1 : pred2; }

  /// Wraps user-supplied predictors (e.g. a working model for the safe path).
  static CrossFitPredictors from_functions(Predictor f1, Predictor f2, const SplitPlan& plan);

  /// f-hat identically zero on both folds.
  static CrossFitPredictors zero(const SplitPlan& plan);

  /// Throws when the predictors were not built against this plan.
  void check_plan(const SplitPlan& plan) const;
};

/// Trains the two fold models on complementary labeled folds.
CrossFitPredictors crossfit(const Dataset& dataset, const SplitPlan& plan, int df,
                            std::vector<double> lambda_grid = {});

}  // namespace ssreg
