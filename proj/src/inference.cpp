#include "ssreg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ssreg/lasso.hpp"
#include "ssreg/rng.hpp"
#include "ssreg/stats.hpp"
#include "ssreg/tuning.hpp"

namespace ssreg {

namespace {

void require_centered(const Dataset& d, const char* who) {
  if (!d.centered) throw std::invalid_argument(std::string(who) + ": dataset must be centered");
}

Matrix weighted_second_moment(const Matrix& x, const Vector& w) {
  Matrix a = x.array().colwise() * w.array();
  Matrix s = Matrix::Zero(x.cols(), x.cols());
  s.selfadjointView<Eigen::Lower>().rankUpdate(a.adjoint());
  s.triangularView<Eigen::StrictlyUpper>() = s.adjoint();
  return s;
}

// Fold evaluations of a predictor on the labeled rows of its own fold.
Vector fold_predictions_labeled(const Dataset& d, const SplitPlan& plan,
                                const CrossFitPredictors& preds) {
  Vector out(d.n());
  for (Index i = 0; i < d.n(); ++i) {
    const int fold = plan.labeled_fold[static_cast<std::size_t>(i)];
    out(i) = preds.for_fold(fold)(d.x_labeled.row(i));
  }
  return out;
}

Vector fold_predictions_unlabeled(const Dataset& d, const SplitPlan& plan,
                                  const CrossFitPredictors& preds) {
  Vector out(d.N());
  for (Index u = 0; u < d.N(); ++u) {
    const int fold = plan.unlabeled_fold[static_cast<std::size_t>(u)];
    out(u) = preds.for_fold(fold)(d.x_unlabeled.row(u));
  }
  return out;
}

// HC3 leverage weights on the active set of a fitted coefficient vector:
// in-sample residuals understate the score second moment, most severely at
// high-leverage observations.
Vector hc3_weights(const Matrix& x, const Vector& theta) {
  const Index n = x.rows();
  std::vector<int> active;
  for (Index j = 0; j < theta.size(); ++j) {
    if (theta(j) != 0.0) active.push_back(static_cast<int>(j));
  }
  Vector w = Vector::Ones(n);
  if (active.empty()) return w;
  Eigen::VectorXi ix(static_cast<Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) ix(static_cast<Index>(k)) = active[k];
  Matrix xa = x(Eigen::all, ix);
  Matrix gram = xa.transpose() * xa;
  gram.diagonal().array() += 1e-10 * std::max(1.0, gram.trace());
  Eigen::LDLT<Matrix> ldlt(gram);
  for (Index i = 0; i < n; ++i) {
    Vector xi_row = xa.row(i).transpose();
    double h = xi_row.dot(ldlt.solve(xi_row));
    h = std::clamp(h, 0.0, 0.95);
    w(i) = 1.0 / ((1.0 - h) * (1.0 - h));
  }
  return w;
}

}  // namespace

Vector debias_efficient(const Dataset& dataset, const SplitPlan& plan,
                        const CrossFitPredictors& predictors, const SparseEstimate& theta_d,
                        const PrecisionEstimate& omega) {
  require_centered(dataset, "debias_efficient");
  if (theta_d.coef.size() != dataset.p() || omega.omega.rows() != dataset.p()) {
    throw std::invalid_argument("debias_efficient: dimension mismatch");
  }
  GramPair g = gram(dataset);
  XiVector xi = xi_crossfit(dataset, plan, predictors);
  return theta_d.coef + omega.omega * (xi.xi - g.sigma_pooled * theta_d.coef);
}

double sigma_sq_hat(const Dataset& dataset, const SplitPlan& plan,
                    const CrossFitPredictors& predictors) {
  require_centered(dataset, "sigma_sq_hat");
  predictors.check_plan(plan);
  Vector fhat = fold_predictions_labeled(dataset, plan, predictors);
  double acc = 0.0;
  for (int j = 1; j <= 2; ++j) {
    double s = 0.0, nj = 0.0;
    for (Index i = 0; i < dataset.n(); ++i) {
      if (plan.labeled_fold[static_cast<std::size_t>(i)] != j) continue;
      const double r = dataset.y(i) - fhat(i);
      s += r * r;
      nj += 1.0;
    }
    acc += 0.5 * (s / nj);
  }
  return acc;
}

Matrix gamma_hat(const Dataset& dataset, const SplitPlan& plan,
                 const CrossFitPredictors& predictors, const SparseEstimate& theta_d,
                 const PrecisionEstimate& omega) {
  require_centered(dataset, "gamma_hat");
  predictors.check_plan(plan);
  const Index p = dataset.p();
  Vector fhat_lab = fold_predictions_labeled(dataset, plan, predictors);
  Vector fhat_unl = fold_predictions_unlabeled(dataset, plan, predictors);
  Matrix total = Matrix::Zero(p, p);
  for (int j = 1; j <= 2; ++j) {
    std::vector<int> lab = plan.labeled_indices(j);
    std::vector<int> unl = plan.unlabeled_indices(j);
    const Index mj = static_cast<Index>(lab.size() + unl.size());
    Matrix w(mj, p);  // rows eta_i (Omega X_i)'
    Index r = 0;
    for (int i : lab) {
      const double eta = fhat_lab(i) - dataset.x_labeled.row(i).dot(theta_d.coef);
      w.row(r++) = eta * (omega.omega * dataset.x_labeled.row(i).transpose()).transpose();
    }
    for (int u : unl) {
      const double eta = fhat_unl(u) - dataset.x_unlabeled.row(u).dot(theta_d.coef);
      w.row(r++) = eta * (omega.omega * dataset.x_unlabeled.row(u).transpose()).transpose();
    }
    Matrix gj = Matrix::Zero(p, p);
    gj.selfadjointView<Eigen::Lower>().rankUpdate(w.adjoint());
    gj.triangularView<Eigen::StrictlyUpper>() = gj.adjoint();
    total += 0.5 * gj / static_cast<double>(mj);
  }
  return total;
}

double variance_efficient(const VarianceComponents& components, const PrecisionEstimate& omega,
                          const Vector& v, Index n, Index N) {
  const double rho = static_cast<double>(n) / static_cast<double>(n + N);
  Matrix omega_sym = omega.symmetrized();
  const double quad = components.sigma_sq_hat * v.dot(omega_sym * v) +
                      rho * v.dot(components.gamma_hat * v);
  if (!(quad > 0)) throw NumericError("degenerate variance");
  return std::sqrt(quad);
}

BMatrix estimate_B(const Dataset& dataset, const SplitPlan& plan,
                   const CrossFitPredictors& m_predictors, const SparseEstimate& theta_l,
                   const std::vector<double>& lambda_grid, int folds, std::uint64_t seed,
                   bool pooled_mu) {
  require_centered(dataset, "estimate_B");
  m_predictors.check_plan(plan);
  const Index p = dataset.p();
  Vector mhat_lab = fold_predictions_labeled(dataset, plan, m_predictors);
  Vector mhat_unl = fold_predictions_unlabeled(dataset, plan, m_predictors);
  Vector resid = dataset.y - dataset.x_labeled * theta_l.coef;

  BMatrix out;
  out.b = Matrix::Zero(p, p);
  out.lambdas = Vector::Zero(p);
  out.degenerate_design = true;

  for (int j = 1; j <= 2; ++j) {
    std::vector<int> lab = plan.labeled_indices(j);
    const Index nj = static_cast<Index>(lab.size());
    if (nj < folds) throw std::invalid_argument("estimate_B: fold too small for CV");

    // mu-hat^j: labeled-only by default, pooled over D_j on request
    Vector mu = Vector::Zero(p);
    for (int i : lab) mu += mhat_lab(i) * dataset.x_labeled.row(i).transpose();
    if (pooled_mu) {
      std::vector<int> unl = plan.unlabeled_indices(j);
      for (int u : unl) mu += mhat_unl(u) * dataset.x_unlabeled.row(u).transpose();
      mu /= static_cast<double>(nj + static_cast<Index>(unl.size()));
    } else {
      mu /= static_cast<double>(nj);
    }
    if (j == 1) {
      out.mu_hat_fold1 = mu;
    } else {
      out.mu_hat_fold2 = mu;
    }

    // covariates W_i = X_i m-hat(X_i) - mu, responses R_ik = X_ik resid_i
    Matrix w(nj, p), resp(nj, p);
    for (Index r = 0; r < nj; ++r) {
      const int i = lab[static_cast<std::size_t>(r)];
      w.row(r) = mhat_lab(i) * dataset.x_labeled.row(i) - mu.transpose();
      resp.row(r) = resid(i) * dataset.x_labeled.row(i);
    }
    const double scale_w = w.cwiseAbs().maxCoeff();
    if (scale_w < 1e-12) continue;  // degenerate fold: zero columns
    out.degenerate_design = false;

    const double njd = static_cast<double>(nj);
    Matrix gram_all = w.transpose() * w / njd;
    Matrix cross_all = w.transpose() * resp / njd;

    // CV sub-folds within this j-fold (grams shared across the p columns)
    std::vector<int> fold_of = cv_fold_assignment(nj, folds, Rng::mix(seed, 0xb0 + j));
    std::vector<Matrix> g_tr(static_cast<std::size_t>(folds)), c_tr(static_cast<std::size_t>(folds)),
        g_te(static_cast<std::size_t>(folds)), c_te(static_cast<std::size_t>(folds));
    std::vector<double> cnt(static_cast<std::size_t>(folds), 0.0);
    for (int f = 0; f < folds; ++f) {
      auto fs = static_cast<std::size_t>(f);
      std::vector<int> rows_te;
      for (Index r = 0; r < nj; ++r) {
        if (fold_of[static_cast<std::size_t>(r)] == f) rows_te.push_back(static_cast<int>(r));
      }
      cnt[fs] = static_cast<double>(rows_te.size());
      Matrix wt(rows_te.size(), p), rt(rows_te.size(), p);
      for (std::size_t k = 0; k < rows_te.size(); ++k) {
        wt.row(static_cast<Index>(k)) = w.row(rows_te[k]);
        rt.row(static_cast<Index>(k)) = resp.row(rows_te[k]);
      }
      g_te[fs] = wt.transpose() * wt;
      c_te[fs] = wt.transpose() * rt;
      g_tr[fs] = (gram_all * njd - g_te[fs]) / (njd - cnt[fs]);
      c_tr[fs] = (cross_all * njd - c_te[fs]) / (njd - cnt[fs]);
      g_te[fs] /= cnt[fs];
      c_te[fs] /= cnt[fs];
    }

    for (Index k = 0; k < p; ++k) {
      std::vector<double> grid = lambda_grid;
      if (grid.empty()) {
        const double lmax = cross_all.col(k).cwiseAbs().maxCoeff();
        if (lmax <= 0) continue;
        grid = geometric_grid(lmax, 15, 0.01);
      } else {
        std::sort(grid.begin(), grid.end(), std::greater<double>());
      }

      // walk the grid from the top with per-fold warm starts; stop descending
      // once the pooled held-out loss has clearly turned upward
      std::vector<LassoPathState> states;
      states.reserve(static_cast<std::size_t>(folds));
      for (int f = 0; f < folds; ++f) {
        auto fs = static_cast<std::size_t>(f);
        states.emplace_back(g_tr[fs], c_tr[fs].col(k), -1, 1e-6, 3000);
      }
      double best_loss = std::numeric_limits<double>::infinity();
      std::size_t best = 0;
      int rising = 0;
      for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        double loss = 0.0;
        for (int f = 0; f < folds; ++f) {
          auto fs = static_cast<std::size_t>(f);
          const Vector& beta = states[fs].step(grid[gi]);
          std::vector<Index> act;
          for (Index a = 0; a < p; ++a) {
            if (beta(a) != 0.0) act.push_back(a);
          }
          double err = 0.0;  // beta' G_te beta - 2 beta' c_te (response term constant)
          for (Index a : act) {
            double acc = 0.0;
            for (Index bcol : act) acc += g_te[fs](a, bcol) * beta(bcol);
            err += beta(a) * acc - 2.0 * beta(a) * c_te[fs](a, k);
          }
          loss += err * cnt[fs] / njd;
        }
        // the held-out response term is omitted, so losses can be negative;
        // widen the rise margin by the loss magnitude
        if (loss < best_loss) {
          best_loss = loss;
          best = gi;
          rising = 0;
        } else if (gi >= 4 && loss > best_loss + 0.02 * std::fabs(best_loss) + 1e-12) {
          if (++rising >= 3) break;
        }
      }
      SparseEstimate fit = lasso_cd_gram(gram_all, cross_all.col(k), grid[best], nullptr, -1, 1e-7);
      out.b.col(k) += 0.5 * fit.coef;
      out.lambdas(k) += 0.5 * grid[best];
    }
  }
  return out;
}

XiVector xi_safe(const Dataset& dataset, const SplitPlan& plan,
                 const CrossFitPredictors& m_predictors, const BMatrix& b, double psi) {
  require_centered(dataset, "xi_safe");
  m_predictors.check_plan(plan);
  const Index p = dataset.p();
  Vector mhat_lab = fold_predictions_labeled(dataset, plan, m_predictors);
  Vector mhat_unl = fold_predictions_unlabeled(dataset, plan, m_predictors);

  Vector gap = Vector::Zero(p);
  for (int j = 1; j <= 2; ++j) {
    Vector lab_sum = Vector::Zero(p);
    double nj = 0.0;
    for (Index i = 0; i < dataset.n(); ++i) {
      if (plan.labeled_fold[static_cast<std::size_t>(i)] != j) continue;
      lab_sum += mhat_lab(i) * dataset.x_labeled.row(i).transpose();
      nj += 1.0;
    }
    Vector unl_sum = Vector::Zero(p);
    double Nj = 0.0;
    for (Index u = 0; u < dataset.N(); ++u) {
      if (plan.unlabeled_fold[static_cast<std::size_t>(u)] != j) continue;
      unl_sum += mhat_unl(u) * dataset.x_unlabeled.row(u).transpose();
      Nj += 1.0;
    }
    gap += lab_sum / nj - (lab_sum + unl_sum) / (nj + Nj);
  }
  XiVector out;
  out.variant = XiVariant::safe_psi;
  out.psi = psi;
  out.xi = labeled_score(dataset) - 0.5 * psi * (b.b.transpose() * gap);
  return out;
}

Vector debias_safe(const Dataset& dataset, const SplitPlan& plan,
                   const CrossFitPredictors& m_predictors, const SparseEstimate& theta_l,
                   const BMatrix& b, const PrecisionEstimate& omega, double psi) {
  require_centered(dataset, "debias_safe");
  if (theta_l.coef.size() != dataset.p() || omega.omega.rows() != dataset.p()) {
    throw std::invalid_argument("debias_safe: dimension mismatch");
  }
  GramPair g = gram(dataset);
  XiVector xi = xi_safe(dataset, plan, m_predictors, b, psi);
  return theta_l.coef + omega.omega * (xi.xi - g.sigma_n * theta_l.coef);
}

VarianceComponents gamma_psi_hat(const Dataset& dataset, const SplitPlan& plan,
                                 const CrossFitPredictors& m_predictors,
                                 const SparseEstimate& theta_l, const BMatrix& b, double psi) {
  require_centered(dataset, "gamma_psi_hat");
  m_predictors.check_plan(plan);
  const Index n = dataset.n();
  const double N = static_cast<double>(dataset.N());
  Vector resid = dataset.y - dataset.x_labeled * theta_l.coef;

  VarianceComponents out;
  out.psi = psi;
  // m1 with the same HC3 leverage adjustment as the baseline sandwich
  Vector w = hc3_weights(dataset.x_labeled, theta_l.coef);
  Vector scaled = resid.cwiseProduct(w.cwiseSqrt());
  out.m1_hat = weighted_second_moment(dataset.x_labeled, scaled) / static_cast<double>(n);

  Vector mhat_lab = fold_predictions_labeled(dataset, plan, m_predictors);
  out.m2_hat = Matrix::Zero(dataset.p(), dataset.p());
  for (int j = 1; j <= 2; ++j) {
    std::vector<int> lab = plan.labeled_indices(j);
    Matrix a(lab.size(), dataset.p());
    Matrix x(lab.size(), dataset.p());
    for (std::size_t r = 0; r < lab.size(); ++r) {
      const int i = lab[r];
      a.row(static_cast<Index>(r)) = resid(i) * mhat_lab(i) * dataset.x_labeled.row(i);
      x.row(static_cast<Index>(r)) = dataset.x_labeled.row(i);
    }
    out.m2_hat += 0.5 * (a.transpose() * x) / static_cast<double>(lab.size());
  }

  const double weight = N * (2.0 * psi - psi * psi) / (static_cast<double>(n) + N);
  out.gamma_hat = out.m1_hat - weight * (b.b.transpose() * out.m2_hat);
  out.gamma_sym = 0.5 * (out.gamma_hat + out.gamma_hat.transpose());
  return out;
}

double variance_safe(const VarianceComponents& components, const PrecisionEstimate& omega,
                     const Vector& v) {
  Vector u = omega.omega.transpose() * v;
  const double quad = u.dot(components.gamma_sym * u);
  if (!(quad > 0)) throw NumericError("degenerate variance");
  return std::sqrt(quad);
}

InferenceResult ci_and_test(double point, double sd, Index n, double alpha, Vector target,
                            std::string method) {
  if (!(sd > 0)) throw std::invalid_argument("ci_and_test: sd must be positive");
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("ci_and_test: alpha must be in (0,1)");
  InferenceResult r;
  r.target = std::move(target);
  r.method = std::move(method);
  r.point = point;
  r.sd = sd;
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double half = z * sd / std::sqrt(static_cast<double>(n));
  r.ci_low = point - half;
  r.ci_high = point + half;
  r.z_stat = std::sqrt(static_cast<double>(n)) * point / sd;
  r.p_value = two_sided_p(r.z_stat);
  return r;
}

std::vector<double> holm_adjust(const std::vector<double>& p_values) {
  const std::size_t m = p_values.size();
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("holm_adjust: p-values must lie in [0,1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (std::size_t rank = 0; rank < m; ++rank) {
    const double stepped = static_cast<double>(m - rank) * p_values[order[rank]];
    running = std::max(running, stepped);
    adjusted[order[rank]] = std::min(1.0, running);
  }
  return adjusted;
}

Vector debias_supervised(const Dataset& dataset, const Vector& theta_init, const Matrix& omega) {
  require_centered(dataset, "debias_supervised");
  GramPair g = gram(dataset);
  return theta_init + omega * (labeled_score(dataset) - g.sigma_n * theta_init);
}

BaselineFit debias_baseline(const Dataset& dataset, BaselineVariant variant, double lambda_lasso,
                            const Vector& lambdas_nodewise) {
  require_centered(dataset, "debias_baseline");
  BaselineFit out;
  out.lasso = lasso_cd(dataset.x_labeled, dataset.y, lambda_lasso);
  if (variant == BaselineVariant::labeled_nodewise) {
    out.omega = nodewise_precision(dataset.x_labeled, lambdas_nodewise);
  } else {
    Matrix stacked(dataset.n() + dataset.N(), dataset.p());
    stacked.topRows(dataset.n()) = dataset.x_labeled;
    if (dataset.N() > 0) stacked.bottomRows(dataset.N()) = dataset.x_unlabeled;
    out.omega = nodewise_precision(stacked, lambdas_nodewise);
  }
  out.theta_debiased = debias_supervised(dataset, out.lasso.coef, out.omega.omega);
  return out;
}

Matrix sandwich_k(const Dataset& dataset, const Vector& theta) {
  require_centered(dataset, "sandwich_k");
  Vector resid = dataset.y - dataset.x_labeled * theta;
  Vector w = hc3_weights(dataset.x_labeled, theta);
  Vector scaled = resid.cwiseProduct(w.cwiseSqrt());
  return weighted_second_moment(dataset.x_labeled, scaled) / static_cast<double>(dataset.n());
}

double baseline_sd(const Dataset& dataset, const Matrix& omega, const Vector& theta_lasso,
                   const Vector& v) {
  Matrix k = sandwich_k(dataset, theta_lasso);
  Vector u = omega.transpose() * v;
  const double quad = u.dot(k * u);
  if (!(quad > 0)) throw NumericError("degenerate variance");
  return std::sqrt(quad);
}

}  // namespace ssreg
