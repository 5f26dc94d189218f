#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nvmix/density.hpp"
#include "nvmix/mixture.hpp"

namespace nvmix {

struct FitConfig {
  double eps_mu = 1e-2;
  double eps_sigma = 1e-2;
  double eps_nu = 1e-2;
  int max_ecme_iter = 30;
  int max_inner_iter = 50;
  // Settings of every estimated log-density and weight.
  DensityConfig likelihood;
  // Rows used for the starting values; 0 means all.
  int subsample_size = 0;
  // Closed-form weights and densities where the family has them.
  bool analytic = true;
  // Reuse weights from nearby Mahalanobis distances inside the inner loop.
  bool interpolate_weights = true;
};

struct FitTraceEntry {
  int iteration = 0;
  std::vector<double> nu;
  // Log-likelihood at (nu_k, mu_{k+1}, sigma_{k+1}) before and after the nu-update.
  double loglik_before = 0.0;
  double loglik = 0.0;
  // Estimation error bound of the log-likelihood (0 when exact).
  double loglik_error = 0.0;
  int inner_iterations = 0;
  bool inner_converged = true;
  double rel_mu = 0.0;
  double rel_sigma = 0.0;
  double rel_nu = 0.0;
  std::string note;
};

struct FitResult {
  std::vector<double> nu;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  std::vector<double> nu0;
  double c0 = 1.0;
  bool start_fallback = false;
  std::vector<FitTraceEntry> trace;
  bool converged = false;
};

// max_i |old_i - new_i| / max(|old_i|, 1e-10)
double rel_diff(std::span<const double> old_value, std::span<const double> new_value);
double rel_diff(const Eigen::MatrixXd& old_value, const Eigen::MatrixXd& new_value);

// E(1/W | X) for squared Mahalanobis distances d2.
Eigen::VectorXd weights(const Eigen::VectorXd& d2, int dim, const MixtureSpec& mix,
                        const FitConfig& cfg, std::uint64_t seed);
Eigen::VectorXd weights(const Eigen::MatrixXd& X, const Eigen::VectorXd& mu,
                        const Eigen::MatrixXd& sigma, const MixtureSpec& mix, const FitConfig& cfg,
                        std::uint64_t seed);

// Weights as a function of D^2, interpolated linearly between stored
// distances when both neighbours are within 10% of each other and estimated
// otherwise. Stored values are forgotten when the mixture changes.
class WeightCache {
 public:
  WeightCache(int dim, const MixtureSpec& mix, const FitConfig& cfg);
  Eigen::VectorXd operator()(const Eigen::VectorXd& d2, std::uint64_t seed);
  std::size_t interpolated() const { return interpolated_; }
  std::size_t estimated() const { return estimated_; }

 private:
  int dim_;
  MixtureSpec mix_;
  FitConfig cfg_;
  std::vector<std::pair<double, double>> knots_;
  std::size_t interpolated_ = 0;
  std::size_t estimated_ = 0;
};

// mu_next = sum delta_i X_i / sum delta_i,
// sigma_next = (1/n) sum delta_i (X_i - mu_current)(X_i - mu_current)^T.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> update_mu_sigma(const Eigen::MatrixXd& X,
                                                            const Eigen::VectorXd& delta,
                                                            const Eigen::VectorXd& mu_current);

struct LogLikelihood {
  double value;
  double error;
};

// Sum of log-densities of the rows of X; exact for closed-form families
// when cfg.analytic is set.
LogLikelihood log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& mu,
                             const Eigen::MatrixXd& sigma, const MixtureSpec& mix,
                             const FitConfig& cfg, std::uint64_t seed);

struct InitialEstimate {
  std::vector<double> nu;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double c = 1.0;
  bool fallback = false;
};

// mu_0 = sample mean and (nu_0, c) maximizing the likelihood with
// sigma = c S_n, where S_n is the sample covariance.
InitialEstimate initial_estimate(const Eigen::MatrixXd& X, const MixtureSpec& mix,
                                 const FitConfig& cfg, std::uint64_t seed);

FitResult fit(const Eigen::MatrixXd& X, const MixtureSpec& mix, const FitConfig& cfg,
              std::uint64_t seed);

struct SimplexResult {
  std::vector<double> x;
  double value;
  int evaluations;
  bool converged;
};

// Nelder-Mead minimization of f starting from x0 with initial edge `step`.
SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                          std::vector<double> x0, double step, double x_tol = 1e-4,
                          double f_tol = 1e-7, int max_evals = 400);

}  // namespace nvmix
