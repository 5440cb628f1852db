#include <doctest.h>

#include <cmath>

#include "properties.hpp"
#include "ssreg/estimators.hpp"
#include "ssreg/inference.hpp"
#include "ssreg/simulate.hpp"
#include "ssreg/stats.hpp"
#include "test_util.hpp"

using namespace ssreg;

namespace {

// mirrors the library's HC3 leverage weighting for the sandwich matrices
Vector naive_hc3_weights(const Matrix& x, const Vector& theta) {
  std::vector<int> act;
  for (Index j = 0; j < theta.size(); ++j) {
    if (theta(j) != 0.0) act.push_back(static_cast<int>(j));
  }
  Vector w = Vector::Ones(x.rows());
  if (act.empty()) return w;
  Eigen::VectorXi ix(static_cast<Index>(act.size()));
  for (std::size_t k = 0; k < act.size(); ++k) ix(static_cast<Index>(k)) = act[k];
  Matrix xa = x(Eigen::all, ix);
  Matrix gram = xa.transpose() * xa;
  gram.diagonal().array() += 1e-10 * std::max(1.0, gram.trace());
  Eigen::LDLT<Matrix> ldlt(gram);
  for (Index i = 0; i < x.rows(); ++i) {
    Vector xi_row = xa.row(i).transpose();
    double h = std::clamp(xi_row.dot(ldlt.solve(xi_row)), 0.0, 0.95);
    w(i) = 1.0 / ((1.0 - h) * (1.0 - h));
  }
  return w;
}

}  // namespace

namespace {

struct Setup {
  Dataset d;
  SplitPlan plan;
  CrossFitPredictors preds;
  SparseEstimate theta;
  PrecisionEstimate omega;
};

Setup make_setup(std::uint64_t seed, Index n = 40, Index N = 24, Index p = 5) {
  Setup s{props::toy_dataset(seed, n, N, p), {}, {}, {}, {}};
  s.plan = make_split(n, N, Rng::mix(seed, 1));
  auto f = [](const Eigen::Ref<const RowVec>& x) { return 0.5 * x(2) * x(2) + 0.2 * x(0); };
  s.preds = CrossFitPredictors::from_functions(f, f, s.plan);
  s.theta = theta_L(s.d, 0.2);
  Matrix stacked(n + N, p);
  stacked.topRows(n) = s.d.x_labeled;
  if (N > 0) stacked.bottomRows(N) = s.d.x_unlabeled;
  s.omega = nodewise_precision(stacked, Vector::Constant(p, 0.05));
  return s;
}

}  // namespace

TEST_CASE("debias_efficient reduces to theta_D when the correction vanishes") {
  Setup s = make_setup(61);
  GramPair g = gram(s.d);

  // zero Omega: no correction at all
  PrecisionEstimate zero_omega = s.omega;
  zero_omega.omega.setZero();
  Vector same = debias_efficient(s.d, s.plan, s.preds, s.theta, zero_omega);
  CHECK((same - s.theta.coef).cwiseAbs().maxCoeff() == 0.0);

  // exact score balance: xi == Sigma theta
  XiVector xi = xi_crossfit(s.d, s.plan, s.preds);
  Eigen::FullPivLU<Matrix> lu(g.sigma_pooled);
  Vector theta_exact = lu.solve(xi.xi);
  SparseEstimate exact;
  exact.coef = theta_exact;
  Vector same2 = debias_efficient(s.d, s.plan, s.preds, exact, s.omega);
  CHECK((same2 - theta_exact).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("debias_efficient matches a hand-expanded computation") {
  Setup s = make_setup(62, 20, 10, 3);
  GramPair g = gram(s.d);
  XiVector xi = xi_crossfit(s.d, s.plan, s.preds);
  Vector expected = s.theta.coef + s.omega.omega * (xi.xi - g.sigma_pooled * s.theta.coef);
  Vector got = debias_efficient(s.d, s.plan, s.preds, s.theta, s.omega);
  CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sigma_sq_hat closed-form cases") {
  Setup s = make_setup(63);

  // f-hat == y on each fold is impossible with a function of x alone, so use
  // the zero predictor identities instead
  CrossFitPredictors zero = CrossFitPredictors::zero(s.plan);
  const double got = sigma_sq_hat(s.d, s.plan, zero);
  double expected = 0.0;
  for (int j = 1; j <= 2; ++j) {
    auto lab = s.plan.labeled_indices(j);
    double acc = 0.0;
    for (int i : lab) acc += s.d.y(i) * s.d.y(i);
    expected += 0.5 * acc / static_cast<double>(lab.size());
  }
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sigma_sq_hat is near 1 with the true conditional mean on Model 1") {
  const Index n = 2000, p = 8;
  Dataset raw = gen_model1(n, 0, p, 4711);
  Dataset d = center(raw);
  SplitPlan plan = make_split(n, 0, 8);
  // true f on the raw scale, recentred to the working scale
  Vector means = d.x_means;
  const double y_mean = d.y_mean;
  auto truth = [means, y_mean](const Eigen::Ref<const RowVec>& xc) {
    RowVec x = xc + means.transpose();
    return model_f(SimModel::model1, x) - y_mean;
  };
  CrossFitPredictors preds = CrossFitPredictors::from_functions(truth, truth, plan);
  const double s2 = sigma_sq_hat(d, plan, preds);
  CHECK(s2 == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("gamma_hat vanishes when f-hat equals the linear fit") {
  Setup s = make_setup(64);
  Vector theta = s.theta.coef;
  auto linear = [theta](const Eigen::Ref<const RowVec>& x) { return x.dot(theta); };
  CrossFitPredictors preds = CrossFitPredictors::from_functions(linear, linear, s.plan);
  Matrix g = gamma_hat(s.d, s.plan, preds, s.theta, s.omega);
  CHECK(g.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gamma_hat matches a naive recomputation and is PSD") {
  Setup s = make_setup(65, 16, 10, 3);
  Matrix g = gamma_hat(s.d, s.plan, s.preds, s.theta, s.omega);

  Matrix naive = Matrix::Zero(3, 3);
  for (int j = 1; j <= 2; ++j) {
    auto lab = s.plan.labeled_indices(j);
    auto unl = s.plan.unlabeled_indices(j);
    Matrix acc = Matrix::Zero(3, 3);
    for (int i : lab) {
      Vector w = s.omega.omega * s.d.x_labeled.row(i).transpose();
      const double eta = s.preds.for_fold(j)(s.d.x_labeled.row(i)) -
                         s.d.x_labeled.row(i).dot(s.theta.coef);
      acc += eta * eta * w * w.transpose();
    }
    for (int u : unl) {
      Vector w = s.omega.omega * s.d.x_unlabeled.row(u).transpose();
      const double eta = s.preds.for_fold(j)(s.d.x_unlabeled.row(u)) -
                         s.d.x_unlabeled.row(u).dot(s.theta.coef);
      acc += eta * eta * w * w.transpose();
    }
    naive += 0.5 * acc / static_cast<double>(lab.size() + unl.size());
  }
  CHECK((g - naive).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("variance_efficient closed forms") {
  VarianceComponents comp;
  comp.sigma_sq_hat = 2.25;
  comp.gamma_hat = Matrix::Zero(3, 3);
  PrecisionEstimate omega;
  omega.omega = Matrix::Identity(3, 3);
  Vector v = Vector::Zero(3);
  v(0) = 1.0;
  CHECK(variance_efficient(comp, omega, v, 50, 0) == doctest::Approx(1.5));

  // n/(n+N) weight shrinks the Gamma term
  comp.gamma_hat = Matrix::Identity(3, 3) * 4.0;
  const double sd_small_N = variance_efficient(comp, omega, v, 100, 0);
  const double sd_large_N = variance_efficient(comp, omega, v, 100, 1000000);
  CHECK(sd_small_N == doctest::Approx(std::sqrt(2.25 + 4.0)));
  CHECK(sd_large_N == doctest::Approx(1.5).epsilon(1e-3));

  comp.sigma_sq_hat = 0.0;
  comp.gamma_hat.setZero();
  CHECK_THROWS_WITH_AS(variance_efficient(comp, omega, v, 10, 0), "degenerate variance",
                       NumericError);
}

TEST_CASE("estimate_B degenerate cases") {
  Setup s = make_setup(66);
  CrossFitPredictors zero_m = CrossFitPredictors::zero(s.plan);

  // m-hat == 0 makes all covariates zero
  BMatrix b0 = estimate_B(s.d, s.plan, zero_m, s.theta, {}, 4, 1);
  CHECK(b0.degenerate_design);
  CHECK(b0.b.cwiseAbs().maxCoeff() == 0.0);

  // huge lambda zeroes B
  BMatrix bhuge = estimate_B(s.d, s.plan, s.preds, s.theta, {1e8}, 4, 1);
  CHECK(bhuge.b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("estimate_B recovers a planted sparse B") {
  // with theta_L = 0 the column-0 response is X_0 Y; choosing |X_0| >= 0.5
  // lets us plant Y = B0_col0' (X m(X) - mu) / X_0 exactly
  Rng rng(67);
  const Index n = 500, p = 6;
  Matrix xl(n, p);
  for (Index i = 0; i < n; ++i) {
    xl(i, 0) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + rng.uniform());
    for (Index j = 1; j < p; ++j) xl(i, j) = rng.normal();
  }
  auto m_fun = [](const Eigen::Ref<const RowVec>& x) { return x(1) * x(1) - 1.0; };

  // mu = E[X m(X)]: coordinate 1 carries E[X_1 (X_1^2 - 1)] = 0; all others 0
  Vector mu = Vector::Zero(p);

  Vector b0_col0 = Vector::Zero(p);
  b0_col0(0) = 1.0;
  b0_col0(1) = -0.5;

  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    Vector w = m_fun(xl.row(i)) * xl.row(i).transpose() - mu;
    const double z0 = b0_col0.dot(w) + 0.05 * rng.normal();
    y(i) = z0 / xl(i, 0);
  }
  Dataset d;
  d.x_labeled = xl;
  d.y = y;
  d.x_unlabeled = Matrix(0, p);
  d.x_means = Vector::Zero(p);
  d.x_scales = Vector::Ones(p);
  d.centered = true;  // symmetric covariates, centered by construction
  SplitPlan plan = make_split(n, 0, 69);
  CrossFitPredictors preds = CrossFitPredictors::from_functions(m_fun, m_fun, plan);
  SparseEstimate theta0;
  theta0.coef = Vector::Zero(p);
  BMatrix best = estimate_B(d, plan, preds, theta0, {}, 5, 70);
  CHECK((best.b.col(0) - b0_col0).cwiseAbs().sum() <= 0.1);
}

TEST_CASE("xi_safe identities and recomputation") {
  Setup s = make_setup(71);
  BMatrix b;
  b.b = Matrix::Identity(5, 5) * 0.4;

  XiVector xi0 = xi_safe(s.d, s.plan, s.preds, b, 0.0);
  CHECK((xi0.xi - labeled_score(s.d)).cwiseAbs().maxCoeff() == 0.0);

  // naive recomputation at psi = 1.3
  const double psi = 1.3;
  Vector gap = Vector::Zero(5);
  for (int j = 1; j <= 2; ++j) {
    auto lab = s.plan.labeled_indices(j);
    auto unl = s.plan.unlabeled_indices(j);
    Vector a = Vector::Zero(5), c = Vector::Zero(5);
    for (int i : lab) {
      Vector t = s.preds.for_fold(j)(s.d.x_labeled.row(i)) * s.d.x_labeled.row(i).transpose();
      a += t;
      c += t;
    }
    for (int u : unl) {
      c += s.preds.for_fold(j)(s.d.x_unlabeled.row(u)) * s.d.x_unlabeled.row(u).transpose();
    }
    gap += a / static_cast<double>(lab.size()) -
           c / static_cast<double>(lab.size() + unl.size());
  }
  Vector expected = labeled_score(s.d) - 0.5 * psi * b.b.transpose() * gap;
  XiVector xi = xi_safe(s.d, s.plan, s.preds, b, psi);
  CHECK((xi.xi - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("debias_safe reductions") {
  Setup s = make_setup(72);
  BMatrix b;
  b.b = Matrix::Identity(5, 5) * 0.4;

  Vector got = debias_safe(s.d, s.plan, s.preds, s.theta, b, s.omega, 0.0);
  Vector expected = debias_supervised(s.d, s.theta.coef, s.omega.omega);
  CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-10);

  // N = 0 collapses for every psi
  Setup s0 = make_setup(73, 30, 0, 4);
  BMatrix b0;
  b0.b = Matrix::Identity(4, 4);
  for (double psi : {0.5, 1.0, 1.9}) {
    Vector g0 = debias_safe(s0.d, s0.plan, s0.preds, s0.theta, b0, s0.omega, psi);
    Vector e0 = debias_supervised(s0.d, s0.theta.coef, s0.omega.omega);
    CHECK((g0 - e0).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("gamma_psi_hat reductions and recomputation") {
  Setup s = make_setup(74, 20, 12, 3);
  BMatrix b;
  b.b = Matrix::Identity(3, 3) * 0.6;

  VarianceComponents c0 = gamma_psi_hat(s.d, s.plan, s.preds, s.theta, b, 0.0);
  CHECK((c0.gamma_hat - c0.m1_hat).cwiseAbs().maxCoeff() == 0.0);
  VarianceComponents c2 = gamma_psi_hat(s.d, s.plan, s.preds, s.theta, b, 2.0);
  CHECK((c2.gamma_hat - c2.m1_hat).cwiseAbs().maxCoeff() == 0.0);

  // naive recomputation of M1 (with its HC3 leverage weights) and M2
  VarianceComponents c1 = gamma_psi_hat(s.d, s.plan, s.preds, s.theta, b, 1.0);
  Matrix m1 = Matrix::Zero(3, 3);
  Vector lev = naive_hc3_weights(s.d.x_labeled, s.theta.coef);
  for (Index i = 0; i < s.d.n(); ++i) {
    const double r = s.d.y(i) - s.d.x_labeled.row(i).dot(s.theta.coef);
    m1 += lev(i) * r * r * s.d.x_labeled.row(i).transpose() * s.d.x_labeled.row(i);
  }
  m1 /= static_cast<double>(s.d.n());
  CHECK((c1.m1_hat - m1).cwiseAbs().maxCoeff() < 1e-10);

  Matrix m2 = Matrix::Zero(3, 3);
  for (int j = 1; j <= 2; ++j) {
    auto lab = s.plan.labeled_indices(j);
    Matrix acc = Matrix::Zero(3, 3);
    for (int i : lab) {
      const double r = s.d.y(i) - s.d.x_labeled.row(i).dot(s.theta.coef);
      const double mi = s.preds.for_fold(j)(s.d.x_labeled.row(i));
      acc += r * mi * s.d.x_labeled.row(i).transpose() * s.d.x_labeled.row(i);
    }
    m2 += 0.5 * acc / static_cast<double>(lab.size());
  }
  CHECK((c1.m2_hat - m2).cwiseAbs().maxCoeff() < 1e-12);
  const double w = static_cast<double>(s.d.N()) / static_cast<double>(s.d.n() + s.d.N());
  Matrix expected = m1 - w * (b.b.transpose() * m2);
  CHECK((c1.gamma_hat - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("variance_safe sandwich reduction at psi in {0, 2}") {
  Setup s = make_setup(75);
  BMatrix b;
  b.b = Matrix::Identity(5, 5) * 0.3;
  Vector v = Vector::Zero(5);
  v(2) = 1.0;
  for (double psi : {0.0, 2.0}) {
    VarianceComponents comp = gamma_psi_hat(s.d, s.plan, s.preds, s.theta, b, psi);
    const double sd = variance_safe(comp, s.omega, v);
    Vector u = s.omega.omega.transpose() * v;
    Matrix m1s = 0.5 * (comp.m1_hat + comp.m1_hat.transpose());
    CHECK(sd == doctest::Approx(std::sqrt(u.dot(m1s * u))).epsilon(1e-12));
  }
}

TEST_CASE("variance_safe is minimized at psi = 1 when the correction is PSD") {
  Setup s = make_setup(76);
  SparseEstimate tl = theta_L(s.d, 0.15);
  BMatrix b = estimate_B(s.d, s.plan, s.preds, tl, {}, 4, 5);
  Vector v = Vector::Zero(5);
  v(0) = 1.0;
  VarianceComponents c1 = gamma_psi_hat(s.d, s.plan, s.preds, tl, b, 1.0);
  Matrix corr = b.b.transpose() * c1.m2_hat;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (corr + corr.transpose()));
  if (es.eigenvalues().minCoeff() >= 0) {
    const double sd1 = variance_safe(c1, s.omega, v);
    for (double psi : {0.25, 0.5, 1.5}) {
      VarianceComponents cp = gamma_psi_hat(s.d, s.plan, s.preds, tl, b, psi);
      CHECK(sd1 <= variance_safe(cp, s.omega, v) + 1e-12);
    }
  }
}

TEST_CASE("ci_and_test quantile, null p-value and endpoint ordering") {
  InferenceResult r = ci_and_test(1.0, 2.0, 100, 0.05);
  const double half = (r.ci_high - r.ci_low) / 2.0;
  CHECK(half * std::sqrt(100.0) / 2.0 == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(r.ci_low <= r.point);
  CHECK(r.point <= r.ci_high);

  InferenceResult null_r = ci_and_test(0.0, 1.0, 50, 0.05);
  CHECK(null_r.p_value == doctest::Approx(1.0));

  CHECK_THROWS_AS(ci_and_test(1.0, 0.0, 10, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(ci_and_test(1.0, 1.0, 10, 1.5), std::invalid_argument);
}

TEST_CASE("holm_adjust worked examples") {
  CHECK(holm_adjust({0.2}) == std::vector<double>{0.2});
  std::vector<double> adj = holm_adjust({0.01, 0.02, 0.03});
  CHECK(adj[0] == doctest::Approx(0.03));
  CHECK(adj[1] == doctest::Approx(0.04));
  CHECK(adj[2] == doctest::Approx(0.04));
  std::vector<double> ones = holm_adjust({1.0, 1.0, 1.0});
  for (double v : ones) CHECK(v == doctest::Approx(1.0));
  CHECK_THROWS_AS(holm_adjust({-0.1}), std::invalid_argument);
  CHECK_THROWS_AS(holm_adjust({1.1}), std::invalid_argument);
}

TEST_CASE("debias_baseline approaches OLS with weak penalties") {
  Rng rng(77);
  const Index n = 120, p = 4;
  Matrix xl = testutil::random_matrix(rng, n, p);
  Vector beta(p);
  beta << 1.0, -2.0, 0.5, 0.0;
  Vector y = xl * beta + 0.2 * testutil::random_vector(rng, n);
  Dataset d = center(make_dataset(xl, y));

  BaselineFit fit = debias_baseline(d, BaselineVariant::labeled_nodewise, 1e-8,
                                    Vector::Constant(p, 1e-8));
  GramPair g = gram(d);
  Vector ols = g.sigma_n.ldlt().solve(labeled_score(d));
  CHECK((fit.theta_debiased - ols).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("debias_baseline with a huge lasso penalty is a pure correction") {
  Setup s = make_setup(78);
  const double lmax = labeled_score(s.d).cwiseAbs().maxCoeff();
  BaselineFit fit = debias_baseline(s.d, BaselineVariant::pooled_nodewise, lmax * 2.0,
                                    Vector::Constant(5, 0.05));
  CHECK(fit.lasso.coef.cwiseAbs().maxCoeff() == 0.0);
  Vector expected = fit.omega.omega * labeled_score(s.d);
  CHECK((fit.theta_debiased - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("baseline sandwich sd matches its definition") {
  Setup s = make_setup(79, 30, 0, 3);
  Vector v = Vector::Zero(3);
  v(1) = 1.0;
  const double sd = baseline_sd(s.d, s.omega.omega, s.theta.coef, v);
  Matrix k = Matrix::Zero(3, 3);
  Vector lev = naive_hc3_weights(s.d.x_labeled, s.theta.coef);
  for (Index i = 0; i < s.d.n(); ++i) {
    const double r = s.d.y(i) - s.d.x_labeled.row(i).dot(s.theta.coef);
    k += lev(i) * r * r * s.d.x_labeled.row(i).transpose() * s.d.x_labeled.row(i);
  }
  k /= static_cast<double>(s.d.n());  // HC3 sandwich
  Vector u = s.omega.omega.transpose() * v;
  CHECK(sd == doctest::Approx(std::sqrt(u.dot(k * u))).epsilon(1e-10));
}

TEST_CASE("inference invariants") {
  for (std::uint64_t seed : {81u, 82u}) {
    auto res = props::inference_invariants(seed);
    INFO(res.detail);
    CHECK(res.pass);
  }
}
