#include "ssreg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ssreg/rng.hpp"

namespace ssreg {

void Dataset::validate() const {
  if (p() < 1) throw std::invalid_argument("dataset: p must be >= 1");
  if (n() < 2) throw std::invalid_argument("dataset: n must be >= 2");
  if (y.size() != n()) throw std::invalid_argument("dataset: y length != n");
  if (x_unlabeled.size() > 0 && x_unlabeled.cols() != p()) {
    throw std::invalid_argument("dataset: labeled/unlabeled column mismatch");
  }
  if (centered) {
    const double m = static_cast<double>(n() + N());
    Vector colsum = x_labeled.colwise().sum();
    if (N() > 0) colsum += x_unlabeled.colwise().sum();
    if ((colsum / m).cwiseAbs().maxCoeff() > 1e-10) {
      throw std::invalid_argument("dataset: centered flag set but column means exceed 1e-10");
    }
    if (std::fabs(y.mean()) > 1e-10) {
      throw std::invalid_argument("dataset: centered flag set but response mean exceeds 1e-10");
    }
  }
}

Dataset make_dataset(Matrix x_labeled, Vector y, Matrix x_unlabeled) {
  Dataset d;
  d.x_labeled = std::move(x_labeled);
  d.y = std::move(y);
  if (x_unlabeled.size() == 0) {
    d.x_unlabeled = Matrix(0, d.x_labeled.cols());
  } else {
    d.x_unlabeled = std::move(x_unlabeled);
  }
  d.x_means = Vector::Zero(d.p());
  d.x_scales = Vector::Ones(d.p());
  d.validate();
  return d;
}

Dataset center(const Dataset& dataset, bool standardize) {
  if (dataset.centered) throw std::invalid_argument("center: dataset already centered");
  if (dataset.n() == 0) throw std::invalid_argument("center: empty labeled set");

  const Index n = dataset.n(), N = dataset.N(), p = dataset.p();
  const double m = static_cast<double>(n + N);

  Dataset out = dataset;
  Vector colsum = out.x_labeled.colwise().sum();
  if (N > 0) colsum += out.x_unlabeled.colwise().sum();
  out.x_means = colsum / m;
  out.y_mean = out.y.mean();

  out.x_labeled.rowwise() -= out.x_means.transpose();
  if (N > 0) out.x_unlabeled.rowwise() -= out.x_means.transpose();
  out.y.array() -= out.y_mean;

  out.x_scales = Vector::Ones(p);
  if (standardize) {
    Vector sqsum = out.x_labeled.colwise().squaredNorm();
    if (N > 0) sqsum += out.x_unlabeled.colwise().squaredNorm().transpose().eval();
    for (Index j = 0; j < p; ++j) {
      double sd = std::sqrt(sqsum(j) / m);
      if (sd < 1e-12) throw std::invalid_argument("center: zero-variance column under standardize");
      out.x_scales(j) = sd;
    }
    out.x_labeled.array().rowwise() /= out.x_scales.transpose().array();
    if (N > 0) out.x_unlabeled.array().rowwise() /= out.x_scales.transpose().array();
  }
  out.centered = true;
  return out;
}

Vector unscale_coef(const Dataset& dataset, const Vector& coef) {
  if (coef.size() != dataset.p()) throw std::invalid_argument("unscale_coef: dimension mismatch");
  return coef.cwiseQuotient(dataset.x_scales);
}

std::vector<int> SplitPlan::labeled_indices(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < labeled_fold.size(); ++i) {
    if (labeled_fold[i] == fold) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> SplitPlan::unlabeled_indices(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < unlabeled_fold.size(); ++i) {
    if (unlabeled_fold[i] == fold) out.push_back(static_cast<int>(i));
  }
  return out;
}

Index SplitPlan::n_fold(int fold) const {
  return static_cast<Index>(std::count(labeled_fold.begin(), labeled_fold.end(), fold));
}

Index SplitPlan::N_fold(int fold) const {
  return static_cast<Index>(std::count(unlabeled_fold.begin(), unlabeled_fold.end(), fold));
}

namespace {

std::vector<int> balanced_assignment(Index size, Rng& rng) {
  std::vector<int> perm(static_cast<std::size_t>(size));
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<int> fold(static_cast<std::size_t>(size), 2);
  for (Index i = 0; i < size / 2; ++i) fold[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = 1;
  return fold;
}

}  // namespace

SplitPlan make_split(Index n, Index N, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("make_split: cannot two-fold split");
  SplitPlan plan;
  plan.seed = seed;
  Rng rl(Rng::mix(seed, 0x5f01));
  plan.labeled_fold = balanced_assignment(n, rl);
  Rng ru(Rng::mix(seed, 0x5f02));
  plan.unlabeled_fold = N > 0 ? balanced_assignment(N, ru) : std::vector<int>();
  return plan;
}

namespace {

Matrix second_moment(const Matrix& x) {
  const Index p = x.cols();
  Matrix s = Matrix::Zero(p, p);
  s.selfadjointView<Eigen::Lower>().rankUpdate(x.adjoint());
  s.triangularView<Eigen::StrictlyUpper>() = s.adjoint();
  return s;
}

}  // namespace

GramPair gram(const Dataset& dataset) {
  if (!dataset.centered) throw std::invalid_argument("gram: dataset must be centered");
  GramPair g;
  Matrix s_lab = second_moment(dataset.x_labeled);
  g.sigma_n = s_lab / static_cast<double>(dataset.n());
  if (dataset.N() == 0) {
    g.sigma_pooled = g.sigma_n;
  } else {
    Matrix s_unl = second_moment(dataset.x_unlabeled);
    g.sigma_pooled = (s_lab + s_unl) / static_cast<double>(dataset.n() + dataset.N());
  }
  return g;
}

}  // namespace ssreg
