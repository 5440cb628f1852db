#include "ssreg/nodewise.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ssreg/lasso.hpp"
#include "ssreg/rng.hpp"
#include "ssreg/tuning.hpp"

namespace ssreg {

namespace {

Matrix pooled_gram(const Matrix& x) {
  const Index p = x.cols();
  Matrix g = Matrix::Zero(p, p);
  g.selfadjointView<Eigen::Lower>().rankUpdate(x.adjoint());
  g.triangularView<Eigen::StrictlyUpper>() = g.adjoint();
  return g / static_cast<double>(x.rows());
}

PrecisionEstimate assemble(const Matrix& gram_full, const Vector& lambdas, Index p) {
  PrecisionEstimate out;
  out.omega = Matrix::Zero(p, p);
  out.gammas.resize(static_cast<std::size_t>(p));
  out.taus_sq = Vector::Zero(p);
  out.lambdas = lambdas;
  for (Index k = 0; k < p; ++k) {
    // the row invariant is a 1e-6 KKT residual; stop an order below it
    SparseEstimate fit = lasso_cd_gram(gram_full, gram_full.col(k), lambdas(k), nullptr, k, 1e-7);
    const Vector& gamma = fit.coef;  // entry k is zero
    // tau_k^2 = (x_k - X_{-k} gamma)' x_k / m, in gram form
    double tau_sq = gram_full(k, k) - gram_full.col(k).dot(gamma);
    if (!(tau_sq > 0.0)) {
      throw NumericError("degenerate nodewise residual");
    }
    out.gammas[static_cast<std::size_t>(k)] = gamma;
    out.taus_sq(k) = tau_sq;
    out.omega.row(k) = -gamma.transpose() / tau_sq;
    out.omega(k, k) = 1.0 / tau_sq;
  }
  return out;
}

}  // namespace

PrecisionEstimate nodewise_precision(const Matrix& x_pooled, const Vector& lambdas) {
  const Index p = x_pooled.cols();
  if (p < 1) throw std::invalid_argument("nodewise: p must be >= 1");
  if (x_pooled.rows() < 2) throw std::invalid_argument("nodewise: need at least two rows");
  if (lambdas.size() != p) throw std::invalid_argument("nodewise: lambdas length mismatch");
  if (lambdas.minCoeff() < 0) throw std::invalid_argument("nodewise: lambdas must be nonnegative");
  return assemble(pooled_gram(x_pooled), lambdas, p);
}

PrecisionEstimate nodewise_precision_cv(const Matrix& x_pooled, int folds, std::uint64_t seed,
                                        int grid_size) {
  const Index p = x_pooled.cols();
  const Index m = x_pooled.rows();
  if (p < 1) throw std::invalid_argument("nodewise: p must be >= 1");
  if (m < folds || folds < 2) throw std::invalid_argument("nodewise: bad fold count");

  if (p == 1) return assemble(pooled_gram(x_pooled), Vector::Zero(1), 1);

  // fold assignment
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::mix(seed, 0x4e57));
  rng.shuffle(order);
  std::vector<int> fold_of(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
        static_cast<int>(i % folds);
  }

  // per-fold held-out grams, plus the full gram
  Matrix gram_full = pooled_gram(x_pooled);
  std::vector<Matrix> gram_test(static_cast<std::size_t>(folds), Matrix::Zero(p, p));
  std::vector<double> count_test(static_cast<std::size_t>(folds), 0.0);
  for (Index i = 0; i < m; ++i) {
    const auto f = static_cast<std::size_t>(fold_of[static_cast<std::size_t>(i)]);
    gram_test[f].selfadjointView<Eigen::Lower>().rankUpdate(x_pooled.row(i).transpose());
    count_test[f] += 1.0;
  }
  const double total = static_cast<double>(m);
  std::vector<Matrix> gram_train(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    auto fs = static_cast<std::size_t>(f);
    gram_test[fs].triangularView<Eigen::StrictlyUpper>() = gram_test[fs].adjoint();
    gram_train[fs] = (gram_full * total - gram_test[fs]) / (total - count_test[fs]);
    gram_test[fs] /= count_test[fs];
  }

  Vector lambdas(p);
  for (Index k = 0; k < p; ++k) {
    Vector c = gram_full.col(k);
    double lmax = 0.0;
    for (Index j = 0; j < p; ++j) {
      if (j != k) lmax = std::max(lmax, std::fabs(c(j)));
    }
    if (lmax <= 0) {
      lambdas(k) = 0.0;
      continue;
    }
    std::vector<double> grid = geometric_grid(lmax, grid_size, 0.05);

    // walk the grid with per-fold warm starts; stop once the pooled held-out
    // loss has clearly turned upward
    std::vector<LassoPathState> states;
    states.reserve(static_cast<std::size_t>(folds));
    for (int f = 0; f < folds; ++f) {
      auto fs = static_cast<std::size_t>(f);
      states.emplace_back(gram_train[fs], gram_train[fs].col(k), k, 1e-7, 5000);
    }
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best = 0;
    int rising = 0;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      double loss = 0.0;
      for (int f = 0; f < folds; ++f) {
        auto fs = static_cast<std::size_t>(f);
        const Vector& gamma = states[fs].step(grid[gi]);
        // held-out (1/m_te)||x_k - X_{-k} gamma||^2 from the fold gram,
        // evaluated on the support only
        std::vector<Index> act;
        for (Index j = 0; j < p; ++j) {
          if (gamma(j) != 0.0) act.push_back(j);
        }
        double err = gram_test[fs](k, k);
        for (Index a : act) err -= 2.0 * gram_test[fs](a, k) * gamma(a);
        for (Index a : act) {
          double acc = 0.0;
          for (Index b : act) acc += gram_test[fs](a, b) * gamma(b);
          err += gamma(a) * acc;
        }
        loss += err * count_test[fs] / total;
      }
      if (loss < best_loss) {
        best_loss = loss;
        best = gi;
        rising = 0;
      } else if (gi >= 4 && loss > best_loss + 0.02 * std::fabs(best_loss) + 1e-12) {
        if (++rising >= 3) break;
      }
    }
    // the prediction-optimal lambda overshoots for inversion accuracy; the
    // residual of Omega Sigma - I scales with lambda_k, so back off
    lambdas(k) = 0.25 * grid[best];
  }
  return assemble(gram_full, lambdas, p);
}

}  // namespace ssreg
