#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nvmix/mixture.hpp"

namespace nvmix {

// Correlation matrix of a Wishart(d, I) draw with d degrees of freedom.
Eigen::MatrixXd wishart_correlation(int d, std::mt19937_64& rng);

// Box (-inf, b] with b ~ U(0, 3 sqrt(d))^d and a Wishart correlation.
struct BoxSetting {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::MatrixXd corr;
};
BoxSetting random_box(int d, std::mt19937_64& rng);

enum class BenchMethod { mc, mc_reordered, rqmc, rqmc_reordered };
std::string to_string(BenchMethod m);
BenchMethod parse_bench_method(const std::string& s);

struct ConvergenceConfig {
  std::vector<int> dims{5, 50, 100};
  // Points per randomization; each run uses exactly this many, once.
  std::vector<std::int64_t> n{256, 512, 1024, 2048, 4096, 8192};
  int settings = 15;
  int B = 15;
  double ci_mult = 3.5;
  std::vector<BenchMethod> methods{BenchMethod::mc, BenchMethod::mc_reordered, BenchMethod::rqmc,
                                   BenchMethod::rqmc_reordered};
  int threads = 0;
};

struct ConvergenceRun {
  int dim;
  int setting;
  BenchMethod method;
  std::int64_t n;
  double estimate;
  double error;
};

struct ConvergenceSummary {
  int dim;
  BenchMethod method;
  std::int64_t n;
  double mean_error;
};

struct ConvergenceSlope {
  int dim;
  BenchMethod method;
  // Least-squares fit of log(mean error) = slope * log(n) + intercept.
  double slope;
  double intercept;
};

struct ConvergenceReport {
  std::vector<ConvergenceRun> runs;
  std::vector<ConvergenceSummary> summary;
  std::vector<ConvergenceSlope> slopes;
};

// Estimated errors of the distribution function for random boxes as a
// function of the sample size, for MC and RQMC with and without reordering.
ConvergenceReport bench_convergence(const MixtureSpec& mix, const ConvergenceConfig& cfg,
                                    std::uint64_t seed);

struct ReorderingConfig {
  int settings = 200;
  int d_min = 5;
  int d_max = 50;
  double nu_min = 0.1;
  double nu_max = 5.0;
  // Pseudo-random samples per variance estimate.
  int samples = 10000;
  int threads = 0;
};

struct ReorderingRow {
  int setting;
  int dim;
  double nu;
  double var_original;
  double var_reordered;
  double ratio;
};

struct ReorderingReport {
  std::vector<ReorderingRow> rows;
  int exceedances = 0;
  double exceedance_fraction = 0.0;
};

// Sample variance of the integrand with and without reordering for random
// multivariate t problems, both on the same uniforms.
ReorderingReport bench_reordering(const ReorderingConfig& cfg, std::uint64_t seed);

// Least-squares slope and intercept of y on x.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace nvmix
