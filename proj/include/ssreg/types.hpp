#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace ssreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using RowVec = Eigen::RowVectorXd;

/// Solver failure (infeasible LP, degenerate residual, non-convergence).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent input data (files, headers, cells).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Output of the sparse solvers (lasso, group lasso, Dantzig selector).
///
/// `feasibility_residual` holds the sup-norm constraint residual for Dantzig
/// solutions and the KKT residual for lasso / group-lasso solutions.
struct SparseEstimate {
  Vector coef;
  double lambda = 0.0;
  double feasibility_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

}  // namespace ssreg
