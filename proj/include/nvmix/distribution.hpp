#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nvmix/mixture.hpp"
#include "nvmix/model.hpp"
#include "nvmix/rqmc.hpp"

namespace nvmix {

// Integration limits and scale factor in the variable order used by the
// integrand. Limits are centred (location subtracted) and unscaled by W.
struct OrderedProblem {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  // Cholesky factor of scale(perm, perm).
  Eigen::MatrixXd factor;
  // perm[i] is the original index of variable i.
  std::vector<int> perm;
  // Expected conditional values used while ordering.
  Eigen::VectorXd y;
  // Pivots that fell below the clamp threshold.
  int clamped_pivots = 0;
};

// Greedy ordering: at each step, the remaining variable with the smallest
// expected conditional probability goes next, with W replaced by E[sqrt(W)].
OrderedProblem reorder(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                       const Eigen::MatrixXd& sigma, double mean_sqrt_w);

// Original order with a plain Cholesky factor.
OrderedProblem natural_order(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             const Eigen::MatrixXd& sigma);

// Separation-of-variables integrand; u has dim entries, u[0] drives W.
double integrand_g(std::span<const double> u, const OrderedProblem& problem,
                   const MixtureSpec& mix);

struct ProbOptions {
  bool reorder = true;
  bool antithetic = true;
  std::size_t n_pilot = 1024;
};

// P(lower < X <= upper). Singular scale matrices are routed to prob_singular.
RqmcResult prob(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, const NvmModel& model,
                const RqmcConfig& cfg, std::uint64_t seed, const ProbOptions& options = {});

// Same probability for a rank-deficient scale matrix, integrating over the
// rank-dimensional space of the factor.
RqmcResult prob_singular(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                         const NvmModel& model, const RqmcConfig& cfg, std::uint64_t seed,
                         const ProbOptions& options = {});

}  // namespace nvmix
