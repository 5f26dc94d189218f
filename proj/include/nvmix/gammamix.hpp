#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nvmix/density.hpp"
#include "nvmix/distribution.hpp"
#include "nvmix/mixture.hpp"
#include "nvmix/model.hpp"
#include "nvmix/rqmc.hpp"

namespace nvmix {

// D^2 = W * chi^2_dim, the squared Mahalanobis distance of an NVM vector.
struct GammaMixParams {
  int dim;
  MixtureSpec mix;
};

// P(D^2 <= x) = E[P(dim/2, x / (2W))].
RqmcResult pgammamix(double x, const GammaMixParams& params, const RqmcConfig& cfg,
                     std::uint64_t seed);

// Density of D^2 at each x (log density when log_scale is set).
std::vector<RqmcResult> dgammamix(std::span<const double> x, const GammaMixParams& params,
                                  const DensityConfig& cfg, std::uint64_t seed, bool log_scale);
RqmcResult dgammamix(double x, const GammaMixParams& params, const DensityConfig& cfg,
                     std::uint64_t seed, bool log_scale);

struct QuantileConfig {
  // Accuracy of the estimated distribution function.
  RqmcConfig rqmc;
  double newton_tol = 1e-4;
  int max_newton = 100;
};

// Quantiles of D^2 by Newton's method on a fixed, growing set of W
// realizations. Inputs are processed in increasing order, each solution
// starting the next search.
std::vector<double> qgammamix(std::span<const double> u, const GammaMixParams& params,
                              const QuantileConfig& cfg, std::uint64_t seed);
double qgammamix(double u, const GammaMixParams& params, const QuantileConfig& cfg,
                 std::uint64_t seed);

// Quantiles of the univariate standardized mixture sqrt(W) Z.
std::vector<double> qnvmix(std::span<const double> u, const MixtureSpec& mix,
                           const QuantileConfig& cfg, std::uint64_t seed);
double qnvmix(double u, const MixtureSpec& mix, const QuantileConfig& cfg, std::uint64_t seed);

// P(X_1 <= F_1^{-1}(u), ..., X_d <= F_d^{-1}(u)).
RqmcResult shortfall_prob(double u, const NvmModel& model, const QuantileConfig& cfg,
                          std::uint64_t seed);

}  // namespace nvmix
