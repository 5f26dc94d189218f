#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nvmix/mixture.hpp"
#include "nvmix/model.hpp"
#include "nvmix/rqmc.hpp"

namespace nvmix {

// Integrand of the density over W:
//   h(w) = (2 pi)^{-dim/2} |Sigma|^{-1/2} w^{-shift_k} exp(-d2 / (2 w)).
// shift_k = dim/2 gives the density itself; dim/2 + 1 gives E[1/W; x].
struct DensityIntegrandParams {
  double d2 = 0.0;
  int dim = 1;
  double log_det = 0.0;
  double shift_k = 0.5;

  static DensityIntegrandParams density(double d2, int dim, double log_det) {
    return {d2, dim, log_det, 0.5 * dim};
  }
  double log_const() const;
  // argmax of h over w > 0.
  double peak_w() const { return 0.5 * d2 / shift_k; }
  double log_h_max() const;
};

double log_h(double w, const DensityIntegrandParams& p);
// log h at w = F_W^{-1}(u).
double log_h(Prob u, const DensityIntegrandParams& p, const MixtureSpec& mix);

struct DensityConfig {
  RqmcConfig rqmc;
  // The integration region keeps h above 10^{-k_th} times its maximum.
  double k_th = 10.0;
  // Bisection tolerance in logit(u) units.
  double eps_bisec = 1e-6;
  // Batches of the shared first-pass estimate.
  int pilot_batches = 4;
};

// Quantile evaluations of W indexed by z = logit(u), kept sorted. A cache
// can extend a shared read-only cache without copying it.
class QuantileCache {
 public:
  struct Knot {
    double z;
    Prob u;
    double w;
  };

  explicit QuantileCache(const MixtureSpec& mix, const std::vector<Knot>* shared = nullptr);

  const MixtureSpec& mixture() const { return mix_; }
  // Range of logits at which the quantile function may be evaluated.
  double z_min() const { return z_min_; }
  double z_max() const { return z_max_; }

  Knot eval(double z);
  void add(const Knot& k);
  std::size_t size() const;
  // All knots in increasing z.
  std::vector<Knot> sorted() const;
  std::vector<Knot> sorted_between(double z_lo, double z_hi) const;

  // Last knot with z < z_hi satisfying pred, where pred is true then false in z.
  std::optional<Knot> last_true(const std::function<bool(const Knot&)>& pred, double z_lo,
                                double z_hi) const;
  std::optional<Knot> first_true(const std::function<bool(const Knot&)>& pred, double z_lo,
                                 double z_hi) const;
  std::optional<Knot> next_above(double z) const;
  std::optional<Knot> next_below(double z) const;

 private:
  const MixtureSpec& mix_;
  const std::vector<Knot>* shared_;
  std::vector<Knot> local_;
  double z_min_;
  double z_max_;
};

enum class Boundary { none, lower, upper };

struct Peak {
  QuantileCache::Knot knot;
  double log_h_max;
  // Set when h is monotone over the whole support of W, or over the range
  // of logits the cache can reach.
  Boundary at = Boundary::none;
  // Bound on log of the integral over the unreachable part of (0,1).
  double log_outside = -std::numeric_limits<double>::infinity();
};

// Locates the u at which log h(F_W^{-1}(u)) is maximal.
Peak find_peak(const DensityIntegrandParams& p, QuantileCache& cache, double eps_bisec);

struct Region {
  // Lower and upper end in u; missing ends are 0 or 1.
  std::optional<QuantileCache::Knot> lower;
  std::optional<QuantileCache::Knot> upper;
  double log_threshold;
};

// Interval around the peak where h exceeds 10^{-k_th} times its maximum.
Region region_bounds(const DensityIntegrandParams& p, QuantileCache& cache, const Peak& peak,
                     double k_th, double eps_bisec);

// log of the integral of h(F_W^{-1}(u)) over (0, 1) for each parameter set.
std::vector<RqmcResult> log_integral_batch(std::span<const DensityIntegrandParams> params,
                                           const MixtureSpec& mix, const DensityConfig& cfg,
                                           std::uint64_t seed);

// Log-density at each row of X.
std::vector<RqmcResult> log_density_batch(const Eigen::MatrixXd& X, const NvmModel& model,
                                          const DensityConfig& cfg, std::uint64_t seed);

// True for mixtures whose density has a closed form (constant, inverse
// gamma, Pareto).
bool has_closed_density(const MixtureSpec& mix);

// Closed-form log-density of the multivariate t and the Pareto mixture.
double closed_log_density(const NvmModel& model, const Eigen::VectorXd& x);
// Same in terms of the squared Mahalanobis distance.
double closed_log_density(const MixtureSpec& mix, double d2, int dim, double log_det);

}  // namespace nvmix
