#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace nvmix {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Sobol' sequence in base 2 with Joe-Kuo direction numbers, optionally
// randomized by a digital shift. Points are generated in Gray-code order and
// the stream can be continued, so consecutive calls to next() return
// consecutive blocks of one extensible sequence.
class SobolStream {
 public:
  static constexpr int kMaxDimension = 3667;

  // Digitally shifted stream; the shift is drawn from the seed.
  SobolStream(int dimension, std::uint64_t seed);
  static SobolStream unrandomized(int dimension);

  int dimension() const { return dim_; }
  std::uint64_t position() const { return index_; }

  // Next n points as an n x dimension matrix with entries in [0, 1).
  RowMatrix next(std::size_t n);
  // Writes n points row-major into out (size n * dimension).
  void next(std::size_t n, std::span<double> out);
  void skip(std::uint64_t n);

 private:
  SobolStream(int dimension, std::vector<std::uint64_t> shift);
  void seek(std::uint64_t index);

  int dim_;
  std::uint64_t index_ = 0;
  std::vector<std::uint64_t> shift_;
  std::vector<std::uint64_t> state_;
  const std::uint64_t* directions_;
};

enum class ToleranceType { absolute, relative };
enum class PointSet { sobol, pseudo };

struct RqmcConfig {
  int B = 15;
  int n0 = 128;
  double tol = 1e-3;
  ToleranceType tol_type = ToleranceType::absolute;
  double ci_mult = 3.5;
  int i_max = 500;
  int threads = 1;
  PointSet method = PointSet::sobol;
};

struct RqmcResult {
  double estimate = 0.0;
  double error = 0.0;
  // Points used per randomization.
  std::int64_t n = 0;
  int iterations = 0;
  bool converged = false;
};

// Integrands receive one point u in (0,1)^dim.
using Integrand = std::function<double(std::span<const double>)>;
// Vector integrands write one value per output into out.
using VectorIntegrand = std::function<void(std::span<const double> u, std::span<double> out)>;

// B independent randomizations of a point set, averaged in plain or log
// space. Each step() adds n0 points to every randomization.
class RqmcEstimator {
 public:
  enum class Space { plain, log };

  RqmcEstimator(VectorIntegrand g, int dim, std::size_t outputs, const RqmcConfig& cfg,
                std::uint64_t seed, Space space);

  void step();
  int iterations() const { return iterations_; }
  std::int64_t points_per_randomization() const { return n_; }
  // Per-randomization estimates for one output, length B.
  std::vector<double> randomization_estimates(std::size_t output) const;
  RqmcResult result(std::size_t output) const;
  bool meets_tolerance(std::size_t output) const;
  bool all_meet_tolerance() const;

 private:
  VectorIntegrand g_;
  int dim_;
  std::size_t outputs_;
  RqmcConfig cfg_;
  Space space_;
  std::vector<SobolStream> streams_;
  std::vector<std::uint64_t> rng_seeds_;
  // B x outputs running estimates, row-major.
  std::vector<double> means_;
  int iterations_ = 0;
  std::int64_t n_ = 0;
};

// Estimates E[g(U)] until the error bound ci_mult * sd / sqrt(B) meets the
// tolerance or i_max additional steps have been taken.
RqmcResult rqmc_estimate(const Integrand& g, int dim, const RqmcConfig& cfg, std::uint64_t seed);

// Same for log E[exp(log_g(U))], with all averaging done in log space.
RqmcResult rqmc_log_estimate(const Integrand& log_g, int dim, const RqmcConfig& cfg,
                             std::uint64_t seed);

// Log-space estimates for several integrands that share the points; each
// output stops contributing to the loop once it meets the tolerance.
std::vector<RqmcResult> rqmc_log_estimate_batch(const VectorIntegrand& log_g, std::size_t outputs,
                                                int dim, const RqmcConfig& cfg, std::uint64_t seed);

// Deterministic seed derivation for sub-streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Number of threads from the configuration, falling back to NVMIX_THREADS.
int resolve_threads(int requested);

// Runs f(i) for i in [0, n) on up to `threads` threads.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f);

}  // namespace nvmix
