#include <doctest.h>

#include <cmath>

#include "properties.hpp"
#include "ssreg/estimators.hpp"
#include "ssreg/inference.hpp"
#include "test_util.hpp"

using namespace ssreg;

namespace {

Dataset linear_dataset(std::uint64_t seed, Index n, Index N, Index p, double noise = 0.3) {
  Rng rng(seed);
  Matrix xl = testutil::random_matrix(rng, n, p);
  Matrix xu = N > 0 ? testutil::random_matrix(rng, N, p) : Matrix(0, p);
  Vector beta = Vector::Zero(p);
  beta(0) = 2.0;
  beta(1) = -1.0;
  Vector y = xl * beta + noise * testutil::random_vector(rng, n);
  return center(make_dataset(std::move(xl), std::move(y), std::move(xu)));
}

}  // namespace

TEST_CASE("xi_crossfit reduces to the labeled score when f-hat is zero") {
  Dataset d = linear_dataset(1, 24, 10, 4);
  SplitPlan plan = make_split(d.n(), d.N(), 3);
  XiVector xi = xi_crossfit(d, plan, CrossFitPredictors::zero(plan));
  CHECK((xi.xi - labeled_score(d)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(xi.variant == XiVariant::crossfit_optimal);
}

TEST_CASE("xi_crossfit reduces to the labeled score when N = 0") {
  Dataset d = linear_dataset(2, 30, 0, 4);
  SplitPlan plan = make_split(d.n(), 0, 5);
  auto messy = [](const Eigen::Ref<const RowVec>& x) { return x(0) * x(0) - 2.0 * x(1); };
  CrossFitPredictors preds = CrossFitPredictors::from_functions(messy, messy, plan);
  XiVector xi = xi_crossfit(d, plan, preds);
  CHECK((xi.xi - labeled_score(d)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("xi_crossfit matches a from-scratch recomputation") {
  Dataset d = linear_dataset(3, 12, 8, 3);
  SplitPlan plan = make_split(12, 8, 7);
  auto quad = [](const Eigen::Ref<const RowVec>& x) { return 0.5 * x(0) * x(0) + x(2); };
  CrossFitPredictors preds = CrossFitPredictors::from_functions(quad, quad, plan);
  XiVector xi = xi_crossfit(d, plan, preds);

  Vector expected = Vector::Zero(3);
  for (int j = 1; j <= 2; ++j) {
    auto lab = plan.labeled_indices(j);
    auto unl = plan.unlabeled_indices(j);
    const double nj = static_cast<double>(lab.size());
    const double mj = nj + static_cast<double>(unl.size());
    Vector t1 = Vector::Zero(3), t2 = Vector::Zero(3), t3 = Vector::Zero(3);
    for (int i : lab) {
      t1 += d.x_labeled.row(i).transpose() * d.y(i);
      t2 += d.x_labeled.row(i).transpose() * quad(d.x_labeled.row(i));
      t3 += d.x_labeled.row(i).transpose() * quad(d.x_labeled.row(i));
    }
    for (int u : unl) t3 += d.x_unlabeled.row(u).transpose() * quad(d.x_unlabeled.row(u));
    expected += 0.5 * (t1 / nj - t2 / nj + t3 / mj);
  }
  CHECK((xi.xi - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("xi_crossfit rejects mismatched plans") {
  Dataset d = linear_dataset(4, 20, 6, 3);
  SplitPlan plan = make_split(20, 6, 1);
  SplitPlan other = make_split(20, 6, 2);
  CrossFitPredictors preds = CrossFitPredictors::zero(other);
  CHECK_THROWS_AS(xi_crossfit(d, plan, preds), std::invalid_argument);
}

TEST_CASE("theta_L is zero above lambda_max and recovers noiseless signals") {
  Dataset d = linear_dataset(5, 60, 0, 5, 0.0);  // noiseless
  const double lmax = labeled_score(d).cwiseAbs().maxCoeff();
  CHECK(theta_L(d, lmax * 1.001).coef.cwiseAbs().maxCoeff() == 0.0);

  SparseEstimate tight = theta_L(d, 1e-9);
  Vector beta = Vector::Zero(5);
  beta(0) = 2.0;
  beta(1) = -1.0;
  CHECK((tight.coef - beta).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("theta_U equals theta_L when N = 0 and vanishes for large lambda") {
  Dataset d = linear_dataset(6, 30, 0, 4);
  CHECK((theta_U(d, 0.2).coef - theta_L(d, 0.2).coef).cwiseAbs().maxCoeff() < 1e-10);
  const double lmax = labeled_score(d).cwiseAbs().maxCoeff();
  CHECK(theta_U(d, lmax * 1.01).coef.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("theta_D reduction identities") {
  Dataset d = linear_dataset(7, 24, 12, 4);
  SplitPlan plan = make_split(24, 12, 9);
  CrossFitPredictors zero = CrossFitPredictors::zero(plan);
  CHECK((theta_D(d, plan, zero, 0.25).coef - theta_U(d, 0.25).coef).cwiseAbs().maxCoeff() <
        1e-10);

  Dataset d0 = linear_dataset(8, 24, 0, 4);
  SplitPlan plan0 = make_split(24, 0, 9);
  CrossFitPredictors zero0 = CrossFitPredictors::zero(plan0);
  CHECK((theta_D(d0, plan0, zero0, 0.25).coef - theta_L(d0, 0.25).coef).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("theta_S reductions at psi = 0 and N = 0") {
  Dataset d = linear_dataset(9, 24, 12, 4);
  SplitPlan plan = make_split(24, 12, 11);
  auto m = [](const Eigen::Ref<const RowVec>& x) { return x(1) * x(1); };
  CrossFitPredictors preds = CrossFitPredictors::from_functions(m, m, plan);
  BMatrix b;
  b.b = Matrix::Identity(4, 4) * 0.7;

  CHECK((theta_S(d, plan, preds, b, 0.0, 0.3).coef - theta_L(d, 0.3).coef).cwiseAbs().maxCoeff() <
        1e-10);

  Dataset d0 = linear_dataset(10, 24, 0, 4);
  SplitPlan plan0 = make_split(24, 0, 11);
  CrossFitPredictors preds0 = CrossFitPredictors::from_functions(m, m, plan0);
  CHECK((theta_S(d0, plan0, preds0, b, 1.3, 0.3).coef - theta_L(d0, 0.3).coef)
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("cv entry points are deterministic and feasible") {
  Dataset d = linear_dataset(11, 40, 20, 5);
  SplitPlan plan = make_split(40, 20, 13);
  CrossFitPredictors zero = CrossFitPredictors::zero(plan);

  CvFit a = theta_D_cv(d, plan, zero, 5, 21, 12);
  CvFit b = theta_D_cv(d, plan, zero, 5, 21, 12);
  CHECK(a.lambda == b.lambda);
  CHECK((a.estimate.coef - b.estimate.coef).cwiseAbs().maxCoeff() == 0.0);

  GramPair g = gram(d);
  XiVector xi = xi_crossfit(d, plan, zero);
  CHECK((g.sigma_pooled * a.estimate.coef - xi.xi).cwiseAbs().maxCoeff() <=
        a.lambda * (1.0 + 1e-6));
}

TEST_CASE("estimator invariants") {
  for (std::uint64_t seed : {51u, 52u}) {
    auto res = props::estimator_invariants(seed);
    INFO(res.detail);
    CHECK(res.pass);
  }
}
