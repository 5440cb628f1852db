#include <doctest.h>

#include <cmath>

#include "properties.hpp"
#include "ssreg/simulate.hpp"
#include "test_util.hpp"

using namespace ssreg;

TEST_CASE("model 1 moments: half-normal mean and AR covariance") {
  const Index draws = 1000000;
  Rng unused(0);
  Dataset d = gen_model1(10, 0, 7, 1);  // smoke only
  CHECK(d.n() == 10);

  // accumulate directly from the generator in chunks
  double x1_sum = 0.0;
  Matrix cov = Matrix::Zero(5, 5);
  Vector mean = Vector::Zero(5);
  const Index chunk = 20000;
  Index done = 0;
  std::uint64_t seed = 10;
  while (done < draws) {
    Dataset block = gen_model1(chunk, 0, 7, seed++);
    x1_sum += block.x_labeled.col(0).sum();
    // recover U from X: U_j = X_j for j >= 2; U_1 = +-X_1, use X columns 2..6
    // directly for the covariance of U_2..U_6
    Matrix u = block.x_labeled.middleCols(1, 5);
    mean += u.colwise().sum().transpose();
    cov += u.transpose() * u;
    done += chunk;
  }
  const double m = static_cast<double>(done);
  CHECK(x1_sum / m == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(0.01));
  mean /= m;
  cov = cov / m - mean * mean.transpose();
  for (Index a = 0; a < 5; ++a) {
    for (Index b = 0; b < 5; ++b) {
      CHECK(cov(a, b) == doctest::Approx(std::pow(0.3, std::abs(a - b))).epsilon(0.015));
    }
  }
}

TEST_CASE("model 2 has a real interaction and unit noise variance") {
  const Index draws = 1000000;
  double inter = 0.0;
  double resid_sq = 0.0;
  const Index chunk = 20000;
  Index done = 0;
  std::uint64_t seed = 20;
  while (done < draws) {
    Dataset block = gen_model2(chunk, 0, 7, seed++);
    for (Index i = 0; i < chunk; ++i) {
      auto x = block.x_labeled.row(i);
      const double s = x(0) + x(1);
      inter += x(0) * x(1) * s * s;
      const double eps = block.y(i) - model_f(SimModel::model2, x);
      resid_sq += eps * eps;
    }
    done += chunk;
  }
  const double m = static_cast<double>(done);
  CHECK(std::fabs(inter / m) > 0.1);                        // interaction moment nonzero
  CHECK(resid_sq / m == doctest::Approx(1.0).epsilon(0.01));  // Var(eps) = 1
}

TEST_CASE("theta_star_oracle projects a linear truth onto itself") {
  CustomModel model;
  model.sample_x = [](Rng& rng, RowVec& row) {
    for (Index j = 0; j < row.size(); ++j) row(j) = rng.normal();
  };
  Vector beta(4);
  beta << 1.0, -0.5, 0.0, 2.0;
  model.f = [beta](const Eigen::Ref<const RowVec>& x) { return x.dot(beta); };
  Vector theta = theta_star_oracle(model, 4, 200000, 3);
  CHECK((theta - beta).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("theta_star_oracle validates inputs") {
  CHECK_THROWS_AS(theta_star_oracle(SimModel::model1, 8, 1000, 1), std::invalid_argument);
}

TEST_CASE("phi_sq_oracle vanishes for linear truths") {
  CustomModel model;
  model.sample_x = [](Rng& rng, RowVec& row) {
    for (Index j = 0; j < row.size(); ++j) row(j) = rng.normal();
  };
  Vector beta(3);
  beta << 2.0, 1.0, -1.0;
  model.f = [beta](const Eigen::Ref<const RowVec>& x) { return x.dot(beta); };
  PhiSqResult r = phi_sq_oracle(model, 3, 200000, 5);
  CHECK(r.value < 0.005);
}

TEST_CASE("phi_sq_oracle reports Model 1 misspecification with an error bar") {
  PhiSqResult r = phi_sq_oracle(SimModel::model1, 8, 200000, 6);
  CHECK(r.value > 0.0);
  CHECK(r.std_error > 0.0);
  CHECK(r.std_error < r.value);
}

TEST_CASE("bound_curves shapes") {
  std::vector<double> grid{0, 100, 400, 800};

  // Phi = 0: lower bound constant in N
  auto flat = bound_curves(0.0, 1.0, 5, 200, 100, grid, 1.0);
  for (const auto& pt : flat) {
    CHECK(pt.lower_bound == doctest::Approx(flat.front().lower_bound));
  }

  // q = infinity drops the s^(1/q) factor
  auto inf_q = bound_curves(1.0, 1.0, 5, 200, 100, grid,
                            std::numeric_limits<double>::infinity());
  auto q1 = bound_curves(1.0, 1.0, 5, 200, 100, grid, 1.0);
  CHECK(q1.front().lower_bound == doctest::Approx(5.0 * inf_q.front().lower_bound));

  // lower bound non-increasing in N; upper bound flat
  auto curve = bound_curves(2.0, 1.0, 5, 200, 100, grid, 2.0);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].lower_bound <= curve[i - 1].lower_bound + 1e-15);
    CHECK(curve[i].supervised_upper == doctest::Approx(curve.front().supervised_upper));
  }
}

TEST_CASE("run_experiment is deterministic and honors method dispatch") {
  SimConfig cfg;
  cfg.model = SimModel::model1;
  cfg.n = 30;
  cfg.N = 16;
  cfg.p = 8;
  cfg.reps = 2;
  cfg.seed = 99;
  cfg.methods = {Method::Dantzig};
  SimMetrics a = run_experiment(cfg);
  SimMetrics b = run_experiment(cfg);
  CHECK(a.by_method[Method::Dantzig].l2 == b.by_method[Method::Dantzig].l2);
  CHECK(a.by_method[Method::Dantzig].l1.size() == 2);
  CHECK(a.by_method.size() == 1);
  CHECK(!a.by_method[Method::Dantzig].has_inference());
  CHECK(a.failed_reps == 0);

  std::vector<std::string> rows = a.csv_rows();
  CHECK(rows.size() == 2);  // l1 + l2 only
}

TEST_CASE("run_experiment validates its configuration") {
  SimConfig cfg;
  cfg.methods = {Method::Dantzig};
  cfg.n = 5;  // too small
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
  cfg.n = 30;
  cfg.methods.clear();
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}

TEST_CASE("sim-harness invariants") {
  auto res = props::sim_invariants(91);
  INFO(res.detail);
  CHECK(res.pass);
}
