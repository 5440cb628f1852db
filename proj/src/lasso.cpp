#include "ssreg/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ssreg {

namespace {

constexpr int kMaxSweeps = 100000;
constexpr double kCoefTol = 1e-9;
constexpr double kKktTol = 1e-6;

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// KKT residual in gram form: grad = c - G b.
double kkt_gram(const Vector& grad, const Vector& coef, double lambda, Index skip) {
  double worst = 0.0;
  for (Index j = 0; j < coef.size(); ++j) {
    if (j == skip) continue;
    double r;
    if (coef(j) != 0.0) {
      r = std::fabs(grad(j) - lambda * (coef(j) > 0 ? 1.0 : -1.0));
    } else {
      r = std::max(0.0, std::fabs(grad(j)) - lambda);
    }
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace

namespace {

// Cyclic coordinate descent with persistent gradient state and an active-set
// phase: full sweeps establish the working set, then only nonzero coordinates
// are iterated until stable.
struct CdCore {
  const Matrix& gram;
  Vector beta;
  Vector grad;  // c - G beta, maintained incrementally
  Index skip;
  double tol = kCoefTol;
  int max_sweeps = kMaxSweeps;
  double kkt_rel = 0.0;  // > 0 enables KKT stopping at kkt_rel * lambda
  double kkt_abs = 0.0;  // > 0 enables KKT stopping at an absolute residual

  bool kkt_ok(double lambda) const {
    if (kkt_rel <= 0.0 && kkt_abs <= 0.0) return false;
    const double r = kkt_gram(grad, beta, lambda, skip);
    return (kkt_rel > 0.0 && r <= kkt_rel * lambda) || (kkt_abs > 0.0 && r <= kkt_abs);
  }

  double sweep_over(const std::vector<Index>& coords, double lambda) {
    double max_change = 0.0;
    for (Index j : coords) {
      const double gjj = gram(j, j);
      const double old = beta(j);
      const double next = gjj <= 0.0 ? 0.0 : soft_threshold(grad(j) + gjj * old, lambda) / gjj;
      const double delta = next - old;
      if (delta != 0.0) {
        grad.noalias() -= gram.col(j) * delta;
        beta(j) = next;
        max_change = std::max(max_change, std::fabs(delta));
      }
    }
    return max_change;
  }

  // returns {sweeps, tol_met}
  std::pair<int, bool> converge(double lambda) {
    const Index q = gram.cols();
    std::vector<Index> all;
    all.reserve(static_cast<std::size_t>(q));
    for (Index j = 0; j < q; ++j) {
      if (j != skip) all.push_back(j);
    }
    int sweeps = 0;
    while (sweeps < max_sweeps) {
      ++sweeps;
      if (sweep_over(all, lambda) <= tol || kkt_ok(lambda)) return {sweeps, true};
      std::vector<Index> active;
      for (Index j : all) {
        if (beta(j) != 0.0) active.push_back(j);
      }
      while (sweeps < max_sweeps) {
        ++sweeps;
        if (sweep_over(active, lambda) <= tol) break;
        if (kkt_ok(lambda)) break;
      }
    }
    return {sweeps, false};
  }
};

}  // namespace

SparseEstimate lasso_cd_gram(const Matrix& gram, const Vector& c, double lambda,
                             const Vector* warm, Index skip, double kkt_abs) {
  const Index q = gram.cols();
  if (q < 1) throw std::invalid_argument("lasso: design must have at least one column");
  if (lambda < 0) throw std::invalid_argument("lasso: lambda must be nonnegative");
  if (!gram.allFinite() || !c.allFinite()) throw std::invalid_argument("lasso: non-finite input");

  SparseEstimate est;
  est.lambda = lambda;
  Vector beta = (warm && warm->size() == q) ? *warm : Vector::Zero(q);
  if (skip >= 0) beta(skip) = 0.0;

  Vector grad = c - gram * beta;
  CdCore core{gram, std::move(beta), std::move(grad), skip, kCoefTol, kMaxSweeps, 0.0, kkt_abs};
  auto [sweeps, tol_met] = core.converge(lambda);
  est.coef = std::move(core.beta);
  est.iterations = sweeps;
  est.feasibility_residual = kkt_gram(core.grad, est.coef, lambda, skip);
  est.converged = tol_met && est.feasibility_residual <= kKktTol;
  return est;
}

SparseEstimate lasso_cd(const Matrix& design, const Vector& response, double lambda) {
  if (design.cols() < 1) throw std::invalid_argument("lasso: design must have at least one column");
  if (design.rows() != response.size()) throw std::invalid_argument("lasso: dimension mismatch");
  if (!design.allFinite() || !response.allFinite()) {
    throw std::invalid_argument("lasso: non-finite input");
  }
  const double n = static_cast<double>(design.rows());
  Matrix g = design.transpose() * design / n;
  Vector c = design.transpose() * response / n;
  return lasso_cd_gram(g, c, lambda);
}

Matrix lasso_path_gram(const Matrix& gram, const Vector& c, const std::vector<double>& grid,
                       Index skip, double tol, int max_sweeps) {
  const Index q = gram.cols();
  Matrix path(q, static_cast<Index>(grid.size()));
  // a coarser-than-contract tol signals a CV search: enable KKT stopping,
  // scaled with the requested tolerance
  const double kkt_rel = tol > kCoefTol ? std::min(1e-3, tol * 1e3) : 0.0;
  CdCore core{gram, Vector::Zero(q), c, skip, tol, max_sweeps, kkt_rel};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    core.converge(grid[i]);
    path.col(static_cast<Index>(i)) = core.beta;
  }
  return path;
}

struct LassoPathState::Impl {
  CdCore core;
};

LassoPathState::LassoPathState(const Matrix& gram, const Vector& c, Index skip, double tol,
                               int max_sweeps)
    : impl_(new Impl{CdCore{gram, Vector::Zero(gram.cols()), c, skip, tol, max_sweeps,
                            tol > kCoefTol ? std::min(1e-3, tol * 1e3) : 0.0}}) {}

LassoPathState::~LassoPathState() = default;
LassoPathState::LassoPathState(LassoPathState&&) noexcept = default;

const Vector& LassoPathState::step(double lambda) {
  impl_->core.converge(lambda);
  return impl_->core.beta;
}

double lasso_kkt_residual(const Matrix& design, const Vector& response, const Vector& coef,
                          double lambda) {
  const double n = static_cast<double>(design.rows());
  Vector grad = design.transpose() * (response - design * coef) / n;
  return kkt_gram(grad, coef, lambda, -1);
}

void GroupSpec::validate(Index q) const {
  if (groups.size() != weights.size()) {
    throw std::invalid_argument("group spec: weights/groups size mismatch");
  }
  std::vector<char> seen(static_cast<std::size_t>(q), 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw std::invalid_argument("group spec: empty group");
    if (!(weights[g] > 0)) throw std::invalid_argument("group spec: weights must be positive");
    for (int j : groups[g]) {
      if (j < 0 || j >= q) throw std::invalid_argument("group spec: index out of range");
      if (seen[static_cast<std::size_t>(j)]) {
        throw std::invalid_argument("group spec: groups must be disjoint");
      }
      seen[static_cast<std::size_t>(j)] = 1;
    }
  }
  for (char s : seen) {
    if (!s) throw std::invalid_argument("group spec: groups must cover all columns");
  }
}

namespace {

struct GroupWork {
  std::vector<Eigen::VectorXi> idx;        // column indices per group
  std::vector<Matrix> eigvec;              // eigenvectors of G_gg
  std::vector<Vector> eigval;              // eigenvalues of G_gg
};

GroupWork prepare_groups(const Matrix& gram, const GroupSpec& spec) {
  GroupWork w;
  const std::size_t ng = spec.groups.size();
  w.idx.resize(ng);
  w.eigvec.resize(ng);
  w.eigval.resize(ng);
  for (std::size_t g = 0; g < ng; ++g) {
    const auto& cols = spec.groups[g];
    Eigen::VectorXi ix(static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) ix(static_cast<Index>(k)) = cols[k];
    w.idx[g] = ix;
    Matrix block = gram(ix, ix);
    Eigen::SelfAdjointEigenSolver<Matrix> es(block);
    w.eigvec[g] = es.eigenvectors();
    w.eigval[g] = es.eigenvalues().cwiseMax(0.0);
  }
  return w;
}

// Exact minimizer of (1/2) b'G b - z'b + t ||b||_2 for one block, using the
// eigendecomposition of G. z components on the null space of G vanish by
// construction (z = X'r/n), so the scalar fixed point is well posed.
Vector block_minimize(const Matrix& v, const Vector& d, const Vector& z, double t) {
  const double znorm = z.norm();
  if (znorm <= t) return Vector::Zero(z.size());
  Vector zt = v.transpose() * z;
  auto psi = [&](double s) {
    double acc = 0.0;
    for (Index i = 0; i < d.size(); ++i) {
      double denom = d(i) + t / s;
      acc += (zt(i) / denom) * (zt(i) / denom);
    }
    return std::sqrt(acc);
  };
  // Fixed point s = psi(s) on (0, s_hi]; psi is increasing in s.
  double lo = 1e-300, hi = 1.0;
  while (psi(hi) > hi && hi < 1e300) hi *= 2.0;
  for (int it = 0; it < 120 && hi - lo > 1e-15 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    if (psi(mid) > mid) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double s = 0.5 * (lo + hi);
  Vector scaled = zt.array() / (d.array() + t / s);
  return v * scaled.matrix();
}

double group_kkt_gram(const Matrix& gram, const Vector& c, const GroupWork& w,
                      const GroupSpec& spec, const Vector& coef, double lambda) {
  Vector grad = c - gram * coef;
  double worst = 0.0;
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    Vector gg = grad(w.idx[g]);
    Vector bg = coef(w.idx[g]);
    const double t = lambda * spec.weights[g];
    double r;
    double bnorm = bg.norm();
    if (bnorm > 0) {
      r = (gg - t * bg / bnorm).norm();
    } else {
      r = std::max(0.0, gg.norm() - t);
    }
    worst = std::max(worst, r);
  }
  return worst;
}

// Block coordinate descent with persistent G*beta state and an active-set
// phase over the nonzero groups.
struct GroupCdCore {
  const Matrix& gram;
  const GroupSpec& spec;
  const GroupWork& work;
  Vector beta;
  Vector gb;  // G beta

  double sweep_over(const std::vector<std::size_t>& groups, double lambda) {
    double max_change = 0.0;
    for (std::size_t g : groups) {
      const auto& ix = work.idx[g];
      Vector bg = beta(ix);
      // z_g = c_g - (G beta)_g + G_gg beta_g
      Vector rhs = c(ix) - gb(ix) + gram(ix, ix) * bg;
      Vector next = block_minimize(work.eigvec[g], work.eigval[g], rhs, lambda * spec.weights[g]);
      Vector delta = next - bg;
      const double change = delta.cwiseAbs().maxCoeff();
      if (change > 0.0) {
        gb.noalias() += gram(Eigen::all, ix) * delta;
        beta(ix) = next;
        max_change = std::max(max_change, change);
      }
    }
    return max_change;
  }

  const Vector& c;

  std::pair<int, bool> converge(double lambda) {
    std::vector<std::size_t> all(spec.groups.size());
    for (std::size_t g = 0; g < all.size(); ++g) all[g] = g;
    int sweeps = 0;
    while (sweeps < kMaxSweeps) {
      ++sweeps;
      if (sweep_over(all, lambda) <= kCoefTol) return {sweeps, true};
      std::vector<std::size_t> active;
      for (std::size_t g : all) {
        bool nz = false;
        for (Index k = 0; k < work.idx[g].size(); ++k) {
          if (beta(work.idx[g](k)) != 0.0) {
            nz = true;
            break;
          }
        }
        if (nz) active.push_back(g);
      }
      while (sweeps < kMaxSweeps) {
        ++sweeps;
        if (sweep_over(active, lambda) <= kCoefTol) break;
      }
    }
    return {sweeps, false};
  }
};

SparseEstimate group_lasso_gram(const Matrix& gram, const Vector& c, const GroupSpec& spec,
                                const GroupWork& w, double lambda, const Vector* warm) {
  const Index q = gram.cols();
  SparseEstimate est;
  est.lambda = lambda;
  Vector beta = (warm && warm->size() == q) ? *warm : Vector::Zero(q);
  Vector gb = gram * beta;
  GroupCdCore core{gram, spec, w, std::move(beta), std::move(gb), c};
  auto [sweeps, tol_met] = core.converge(lambda);
  est.coef = std::move(core.beta);
  est.iterations = sweeps;
  est.feasibility_residual = group_kkt_gram(gram, c, w, spec, est.coef, lambda);
  est.converged = tol_met && est.feasibility_residual <= kKktTol;
  return est;
}

}  // namespace

SparseEstimate group_lasso(const Matrix& design, const Vector& response, const GroupSpec& spec,
                           double lambda) {
  if (design.rows() != response.size()) throw std::invalid_argument("group lasso: dimension mismatch");
  if (!design.allFinite() || !response.allFinite()) {
    throw std::invalid_argument("group lasso: non-finite input");
  }
  if (lambda < 0) throw std::invalid_argument("group lasso: lambda must be nonnegative");
  spec.validate(design.cols());
  const double n = static_cast<double>(design.rows());
  Matrix g = design.transpose() * design / n;
  Vector c = design.transpose() * response / n;
  GroupWork w = prepare_groups(g, spec);
  return group_lasso_gram(g, c, spec, w, lambda, nullptr);
}

Matrix group_lasso_path(const Matrix& design, const Vector& response, const GroupSpec& spec,
                        const std::vector<double>& grid) {
  if (design.rows() != response.size()) throw std::invalid_argument("group lasso: dimension mismatch");
  spec.validate(design.cols());
  const double n = static_cast<double>(design.rows());
  Matrix g = design.transpose() * design / n;
  Vector c = design.transpose() * response / n;
  GroupWork w = prepare_groups(g, spec);

  Matrix path(design.cols(), static_cast<Index>(grid.size()));
  Vector warm = Vector::Zero(design.cols());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    SparseEstimate est = group_lasso_gram(g, c, spec, w, grid[i], &warm);
    warm = est.coef;
    path.col(static_cast<Index>(i)) = est.coef;
  }
  return path;
}

double group_kkt_residual(const Matrix& design, const Vector& response, const GroupSpec& spec,
                          const Vector& coef, double lambda) {
  const double n = static_cast<double>(design.rows());
  Matrix g = design.transpose() * design / n;
  Vector c = design.transpose() * response / n;
  GroupWork w = prepare_groups(g, spec);
  return group_kkt_gram(g, c, w, spec, coef, lambda);
}

}  // namespace ssreg
