#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ssreg/dataset.hpp"
#include "ssreg/rng.hpp"
#include "ssreg/types.hpp"

namespace ssreg {

enum class SimModel { model1, model2 };

enum class Method { OSSL, SSSL, Dantzig, UDantzig, DLasso1, DLasso2 };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct SimConfig {
  SimModel model = SimModel::model1;
  Index n = 100;
  Index N = 100;
  Index p = 200;
  int reps = 100;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::vector<Method> methods;
  double psi = 1.0;
  int threads = 1;
  int df = 5;
  int cv_folds = 5;
  int grid_size = 30;
  bool with_inference = true;  // when false, record estimation errors only

  void validate() const;
};

/// Per-method Monte Carlo records; inference vectors stay empty for methods
/// without a debiased counterpart.
struct MethodMetrics {
  std::vector<double> l1;
  std::vector<double> l2;
  std::vector<std::array<double, 3>> len_targets;  // reported coefficients
  std::vector<std::array<double, 3>> cov_targets;
  std::vector<double> len_off;  // mean CI length over off-support coords
  std::vector<double> cov_off;  // mean coverage over off-support coords

  bool has_inference() const { return !len_off.empty(); }
};

struct SimMetrics {
  SimConfig config;
  std::vector<int> report_coords;  // zero-based reported coefficients
  std::vector<int> off_support;    // zero-based off-support coords
  std::map<Method, MethodMetrics> by_method;
  int failed_reps = 0;
  std::vector<std::string> failures;

  /// CSV rows "model,p,n,N,reps,method,metric,mean,sd" (no header).
  std::vector<std::string> csv_rows() const;
  static std::string csv_header();
};

/// Model 1: additive conditional mean on X1..X6, AR(0.3) Gaussian covariates
/// with X1 = |U1|. Returns an uncentered dataset.
Dataset gen_model1(Index n, Index N, Index p, std::uint64_t seed);

/// Model 2: non-additive mean with an (X1 + X2)^2 interaction.
Dataset gen_model2(Index n, Index N, Index p, std::uint64_t seed);

/// Conditional-mean value of the generating model at an uncentered row.
double model_f(SimModel model, const Eigen::Ref<const RowVec>& x);

/// Monte Carlo projection theta* = argmin E (f(X) - X'theta)^2 on centered
/// variables. Requires mc_samples >= 1e5.
Vector theta_star_oracle(SimModel model, Index p, Index mc_samples, std::uint64_t seed);

/// Custom data law for the oracles: a row sampler and a mean function.
struct CustomModel {
  std::function<void(Rng&, RowVec&)> sample_x;
  std::function<double(const Eigen::Ref<const RowVec>&)> f;
};

Vector theta_star_oracle(const CustomModel& model, Index p, Index mc_samples, std::uint64_t seed);

struct PhiSqResult {
  double value = 0.0;
  double std_error = 0.0;  // batch-mean standard error
};

/// Monte Carlo estimate of E (f(X) - X'theta*)^2 on centered variables.
PhiSqResult phi_sq_oracle(SimModel model, Index p, Index mc_samples, std::uint64_t seed);
PhiSqResult phi_sq_oracle(const CustomModel& model, Index p, Index mc_samples, std::uint64_t seed,
                          const Vector* theta_star = nullptr);

struct BoundPoint {
  double N = 0.0;
  double lower_bound = 0.0;
  double supervised_upper = 0.0;
};

/// Minimax lower-bound curve and the supervised Dantzig upper bound (up to
/// unit constants), for plotting against N. Pass q = infinity for s^(1/q)=1.
std::vector<BoundPoint> bound_curves(double phi, double sigma, double s, double p, double n,
                                     const std::vector<double>& N_grid, double q);

/// Cached theta* ground truth per (model, p) at 1e6 Monte Carlo samples.
const Vector& theta_star_cached(SimModel model, Index p);

/// Runs the Monte Carlo study: per replication generate, center, split, fit
/// the requested methods, record errors and CI coverage. Replications with
/// errors are skipped (recorded); more than 10% failures aborts.
SimMetrics run_experiment(const SimConfig& config);

}  // namespace ssreg
