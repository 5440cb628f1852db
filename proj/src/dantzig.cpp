#include "ssreg/dantzig.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ssreg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotEps = 1e-9;
constexpr int kRefactorEvery = 64;

}  // namespace

DantzigPath::DantzigPath(Matrix sigma, Vector xi) : sigma_(std::move(sigma)), xi_(std::move(xi)) {
  p_ = sigma_.rows();
  if (p_ < 1 || sigma_.cols() != p_) throw std::invalid_argument("dantzig: sigma must be square");
  if (xi_.size() != p_) throw std::invalid_argument("dantzig: xi dimension mismatch");
  if (!sigma_.allFinite() || !xi_.allFinite()) throw std::invalid_argument("dantzig: non-finite input");
  reset_basis();
}

double DantzigPath::upper(Index var) const { return var < 2 * p_ ? kInf : 2.0 * lambda_; }

Vector DantzigPath::column(Index var) const {
  if (var < p_) return sigma_.col(var);
  if (var < 2 * p_) return -sigma_.col(var - p_);
  Vector e = Vector::Zero(p_);
  e(var - 2 * p_) = 1.0;
  return e;
}

void DantzigPath::reset_basis() {
  basis_.resize(static_cast<std::size_t>(p_));
  status_.assign(static_cast<std::size_t>(3 * p_), Status::AtLower);
  for (Index r = 0; r < p_; ++r) {
    basis_[static_cast<std::size_t>(r)] = 2 * p_ + r;
    status_[static_cast<std::size_t>(2 * p_ + r)] = Status::Basic;
  }
  binv_ = Matrix::Identity(p_, p_);
  xb_ = Vector::Zero(p_);
  recompute_d();
}

void DantzigPath::refactorize() {
  Matrix b(p_, p_);
  for (Index r = 0; r < p_; ++r) b.col(r) = column(basis_[static_cast<std::size_t>(r)]);
  Eigen::PartialPivLU<Matrix> lu(b);
  binv_ = lu.inverse();
  recompute_xb();
  recompute_d();
}

void DantzigPath::recompute_xb() {
  Vector b_adj = Vector::Constant(p_, lambda_) + xi_;
  for (Index j = 2 * p_; j < 3 * p_; ++j) {
    if (status_[static_cast<std::size_t>(j)] == Status::AtUpper) b_adj(j - 2 * p_) -= 2.0 * lambda_;
  }
  xb_.noalias() = binv_ * b_adj;
}

void DantzigPath::recompute_d() {
  Vector cb = Vector::Zero(p_);
  for (Index r = 0; r < p_; ++r) {
    if (basis_[static_cast<std::size_t>(r)] < 2 * p_) cb(r) = 1.0;
  }
  Vector y = binv_.transpose() * cb;
  Vector sy = sigma_.transpose() * y;
  d_.resize(3 * p_);
  d_.segment(0, p_) = Vector::Ones(p_) - sy;
  d_.segment(p_, p_) = Vector::Ones(p_) + sy;
  d_.segment(2 * p_, p_) = -y;
}

// Returns the row with the largest bound violation, or -1 if primal feasible.
// In Bland mode returns the violated row with the smallest basic variable
// index instead.
Index DantzigPath::worst_violation(double* amount, bool bland) const {
  Index row = -1;
  double worst = tol_primal_;
  Index smallest_var = 3 * p_;
  for (Index r = 0; r < p_; ++r) {
    const Index var = basis_[static_cast<std::size_t>(r)];
    double viol = 0.0;
    if (xb_(r) < -tol_primal_) {
      viol = -xb_(r);
    } else {
      double u = upper(var);
      if (xb_(r) > u + tol_primal_) viol = xb_(r) - u;
    }
    if (viol <= tol_primal_) continue;
    if (bland) {
      if (var < smallest_var) {
        smallest_var = var;
        row = r;
        worst = viol;
      }
    } else if (viol > worst) {
      worst = viol;
      row = r;
    }
  }
  if (row >= 0 && amount) *amount = worst;
  return row;
}

// alpha(j) = (e_r' Binv A)_j over all 3p variables.
void DantzigPath::pivot_row(Index r, Vector& alpha) const {
  Vector rho = binv_.row(r);
  Vector srho = sigma_.transpose() * rho;
  alpha.resize(3 * p_);
  alpha.segment(0, p_) = srho;
  alpha.segment(p_, p_) = -srho;
  alpha.segment(2 * p_, p_) = rho;
}

// One dual simplex pivot for the violated row r. Returns false when no
// entering column exists (primal infeasible).
bool DantzigPath::dual_iterate(Index r, const Vector& alpha, bool bland) {
  const Index leaving = basis_[static_cast<std::size_t>(r)];
  const bool below = xb_(r) < -tol_primal_;  // violated lower bound (all lowers are 0)
  const double delta_sign = below ? 1.0 : -1.0;

  // Entering candidates keep dual feasibility: theta = d_q / alpha_q stays on
  // the correct side of zero; pick the smallest |d/alpha|.
  Index entering = -1;
  double best_ratio = kInf;
  double best_alpha = 0.0;
  for (Index j = 0; j < 3 * p_; ++j) {
    const Status st = status_[static_cast<std::size_t>(j)];
    if (st == Status::Basic) continue;
    const double a = alpha(j);
    if (std::fabs(a) <= kPivotEps) continue;
    const bool ok = (st == Status::AtLower) ? (delta_sign * a < 0) : (delta_sign * a > 0);
    if (!ok) continue;
    const double ratio = std::fabs(d_(j)) / std::fabs(a);
    if (bland) {
      if (ratio < best_ratio - 1e-12 ||
          (ratio <= best_ratio + 1e-12 && (entering < 0 || j < entering))) {
        if (ratio < best_ratio) best_ratio = ratio;
        entering = j;
        best_alpha = a;
      }
    } else if (ratio < best_ratio - 1e-12 ||
               (ratio <= best_ratio + 1e-12 && std::fabs(a) > std::fabs(best_alpha))) {
      if (ratio < best_ratio) best_ratio = ratio;
      entering = j;
      best_alpha = a;
    }
  }
  if (entering < 0) return false;

  Vector w = binv_ * column(entering);
  double wr = w(r);
  if (std::fabs(wr) < kPivotEps * 1e-3) {
    // numerically unusable pivot; refactorize and let the caller retry
    refactorize();
    return true;
  }

  const double target = below ? 0.0 : upper(leaving);
  const double step = (xb_(r) - target) / wr;
  xb_.noalias() -= w * step;
  const double entering_from = (status_[static_cast<std::size_t>(entering)] == Status::AtUpper)
                                   ? upper(entering)
                                   : 0.0;
  xb_(r) = entering_from + step;

  // eta update of Binv
  Vector row_r = binv_.row(r) / wr;
  for (Index k = 0; k < p_; ++k) {
    if (k == r) continue;
    const double wk = w(k);
    if (wk != 0.0) binv_.row(k).noalias() -= wk * row_r.transpose();
  }
  binv_.row(r) = row_r;

  // reduced costs
  const double theta = d_(entering) / alpha(entering);
  if (theta != 0.0) {
    for (Index j = 0; j < 3 * p_; ++j) {
      if (status_[static_cast<std::size_t>(j)] == Status::Basic) continue;
      d_(j) -= theta * alpha(j);
    }
  }
  d_(leaving) = -theta;
  d_(entering) = 0.0;

  basis_[static_cast<std::size_t>(r)] = entering;
  status_[static_cast<std::size_t>(entering)] = Status::Basic;
  status_[static_cast<std::size_t>(leaving)] = below ? Status::AtLower : Status::AtUpper;
  ++pivots_total_;
  return true;
}

SparseEstimate DantzigPath::extract() const {
  SparseEstimate est;
  est.lambda = lambda_;
  Vector theta = Vector::Zero(p_);
  for (Index r = 0; r < p_; ++r) {
    const Index var = basis_[static_cast<std::size_t>(r)];
    if (var < p_) {
      theta(var) += xb_(r);
    } else if (var < 2 * p_) {
      theta(var - p_) -= xb_(r);
    }
  }
  est.coef = theta;
  est.feasibility_residual = (sigma_ * theta - xi_).cwiseAbs().maxCoeff();
  est.iterations = static_cast<int>(pivots_total_);
  est.converged = true;
  return est;
}

SparseEstimate DantzigPath::solve(double lambda) {
  if (lambda < 0) throw std::invalid_argument("dantzig: lambda must be nonnegative");
  lambda_ = lambda;
  tol_primal_ = 1e-11 * std::max(1.0, xi_.cwiseAbs().maxCoeff() + lambda);
  recompute_xb();

  const long limit = 400 * p_ + 20000;
  long iters = 0;
  bool bland = false;
  int finish_rounds = 0;
  while (true) {
    double viol = 0.0;
    Index r = worst_violation(&viol, bland);
    if (r < 0) {
      // confirm optimality on a fresh factorization to flush drift
      if (finish_rounds >= 2) break;
      ++finish_rounds;
      refactorize();
      continue;
    }
    Vector alpha;
    pivot_row(r, alpha);
    if (!dual_iterate(r, alpha, bland)) {
      std::ostringstream msg;
      msg << "LP infeasible: row " << r << " violation " << viol << " at lambda " << lambda;
      throw NumericError(msg.str());
    }
    finish_rounds = 0;
    ++iters;
    if (iters % kRefactorEvery == 0) refactorize();
    if (iters > limit) {
      if (!bland) {
        bland = true;
        refactorize();
        iters = 0;
      } else {
        throw NumericError("dantzig: simplex iteration limit exceeded");
      }
    }
  }

  SparseEstimate est = extract();
  if (est.feasibility_residual > lambda * (1.0 + 1e-6) + 1e-12) {
    throw NumericError("dantzig: feasibility tolerance exceeded after solve");
  }
  return est;
}

SparseEstimate dantzig_lp(const Matrix& sigma, const Vector& xi, double lambda) {
  DantzigPath path(sigma, xi);
  return path.solve(lambda);
}

}  // namespace ssreg
