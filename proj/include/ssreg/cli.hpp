#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ssreg::cli {

/// Exit codes: 0 success, 1 usage, 2 data, 3 numerical.
int run_cli(int argc, const char* const* argv);

struct EstimateArgs {
  std::string labeled, unlabeled, response = "y", out = "estimates.csv";
  std::vector<std::string> methods{"Dantzig"};
  double lambda = -1.0;  // < 0 means cross-validated
  double psi = 1.0;
  std::uint64_t seed = 1;
  bool impute_mean = false;
  bool standardize = false;
  int df = 5;
  int folds = 5;
  int grid_size = 30;
};

struct InferArgs {
  std::string labeled, unlabeled, response = "y", out = "inference.csv";
  std::vector<std::string> methods{"SSSL"};
  double alpha = 0.05;
  double psi = 1.0;
  std::uint64_t seed = 1;
  bool impute_mean = false;
  bool standardize = false;
  int df = 5;
  int folds = 5;
  int grid_size = 30;
};

struct SimulateArgs {
  std::string model = "model1";
  std::uint64_t n = 100;
  std::vector<std::uint64_t> N_list{100};
  std::uint64_t p = 200;
  int reps = 100;
  std::vector<std::string> methods{"OSSL", "SSSL", "Dantzig", "UDantzig", "DLasso1", "DLasso2"};
  double alpha = 0.05;
  double psi = 1.0;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out = "sim_metrics.csv";
};

struct OracleArgs {
  std::string what = "theta_star";  // theta_star | phi_sq | bounds
  std::string model = "model1";
  std::uint64_t p = 20;
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 1;
  std::string out = "oracle.csv";
  // bounds parameters
  double phi = 1.0, sigma = 1.0, s = 5.0, q = 1.0;
  std::uint64_t n = 100;
  std::vector<double> N_grid;
};

void run_estimate(const EstimateArgs& args);
void run_infer(const InferArgs& args);
void run_simulate(const SimulateArgs& args);
void run_oracle(const OracleArgs& args);

}  // namespace ssreg::cli
