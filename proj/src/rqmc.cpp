#include "nvmix/rqmc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <boost/random/detail/sobol_table.hpp>

#include "nvmix/error.hpp"
#include "nvmix/special.hpp"

namespace nvmix {

namespace {

constexpr int kBits = 64;
constexpr double kTwoM53 = 1.0 / 9007199254740992.0;
// Half of one 53-bit grid cell, keeps every coordinate strictly inside (0,1).
constexpr double kHalfCell = 0.5 * kTwoM53;

using Table = boost::random::detail::qrng_tables::sobol;

// Direction numbers v[dim * 64 + j] for all supported dimensions.
const std::vector<std::uint64_t>& direction_table() {
  static const std::vector<std::uint64_t> table = [] {
    const int dims = SobolStream::kMaxDimension;
    std::vector<std::uint64_t> v(static_cast<std::size_t>(dims) * kBits);
    std::vector<std::uint64_t> m(kBits);
    for (int dim = 0; dim < dims; ++dim) {
      if (dim == 0) {
        std::fill(m.begin(), m.end(), 1u);
      } else {
        const unsigned poly = Table::polynomial(dim - 1);
        const int degree = std::bit_width(poly) - 1;
        for (int k = 0; k < degree; ++k) m[k] = Table::minit(dim - 1, k);
        for (int j = degree; j < kBits; ++j) {
          unsigned p = poly;
          std::uint64_t mj = m[j - degree];
          for (int k = 0; k < degree; ++k, p >>= 1) {
            const int rem = degree - k;
            if (p & 1u) mj ^= m[j - rem] << rem;
          }
          m[j] = mj;
        }
      }
      for (int j = 0; j < kBits; ++j) v[static_cast<std::size_t>(dim) * kBits + j] = m[j] << (kBits - 1 - j);
    }
    return v;
  }();
  return table;
}

void check_dimension(int dimension) {
  if (dimension < 1 || dimension > SobolStream::kMaxDimension) {
    throw UnsupportedError("unsupported dimension " + std::to_string(dimension) +
                           " for the Sobol' sequence (1.." +
                           std::to_string(SobolStream::kMaxDimension) + ")");
  }
}

double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * kTwoM53; }

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SobolStream::SobolStream(int dimension, std::vector<std::uint64_t> shift)
    : dim_(dimension), shift_(std::move(shift)), state_(dimension, 0) {
  check_dimension(dimension);
  directions_ = direction_table().data();
}

SobolStream::SobolStream(int dimension, std::uint64_t seed) : SobolStream(dimension, std::vector<std::uint64_t>(dimension, 0)) {
  std::mt19937_64 rng(seed);
  shift_.resize(dimension);
  for (auto& s : shift_) s = rng();
}

SobolStream SobolStream::unrandomized(int dimension) {
  return SobolStream(dimension, std::vector<std::uint64_t>(dimension, 0));
}

void SobolStream::seek(std::uint64_t index) {
  const std::uint64_t gray = index ^ (index >> 1);
  for (int d = 0; d < dim_; ++d) {
    std::uint64_t x = 0;
    const std::uint64_t* v = directions_ + static_cast<std::size_t>(d) * kBits;
    for (int j = 0; j < kBits; ++j)
      if ((gray >> j) & 1u) x ^= v[j];
    state_[d] = x;
  }
  index_ = index;
}

void SobolStream::skip(std::uint64_t n) { seek(index_ + n); }

void SobolStream::next(std::size_t n, std::span<double> out) {
  if (out.size() < n * static_cast<std::size_t>(dim_))
    throw DomainError("SobolStream::next: output buffer too small");
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * dim_;
    for (int d = 0; d < dim_; ++d) row[d] = to_unit(state_[d] ^ shift_[d]);
    ++index_;
    const int c = std::countr_zero(index_);
    for (int d = 0; d < dim_; ++d) state_[d] ^= directions_[static_cast<std::size_t>(d) * kBits + c];
  }
}

RowMatrix SobolStream::next(std::size_t n) {
  RowMatrix m(static_cast<Eigen::Index>(n), dim_);
  next(n, std::span<double>(m.data(), m.size()));
  return m;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NVMIX_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
  const std::size_t t = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  for (std::size_t k = 0; k < t; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (std::size_t i = k; i < n; i += t) f(i);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

RqmcEstimator::RqmcEstimator(VectorIntegrand g, int dim, std::size_t outputs,
                             const RqmcConfig& cfg, std::uint64_t seed, Space space)
    : g_(std::move(g)), dim_(dim), outputs_(outputs), cfg_(cfg), space_(space) {
  if (cfg.B < 2) throw DomainError("RQMC needs at least two randomizations");
  if (cfg.n0 < 1) throw DomainError("RQMC needs n0 >= 1");
  if (!(cfg.tol >= 0.0)) throw DomainError("RQMC tolerance must be non-negative");
  if (cfg.method == PointSet::sobol) {
    check_dimension(dim);
    streams_.reserve(cfg.B);
    for (int b = 0; b < cfg.B; ++b) streams_.emplace_back(dim, derive_seed(seed, b));
  } else {
    if (dim < 1) throw UnsupportedError("unsupported dimension " + std::to_string(dim));
    for (int b = 0; b < cfg.B; ++b) rng_seeds_.push_back(derive_seed(seed, b));
  }
  means_.assign(static_cast<std::size_t>(cfg.B) * outputs_, 0.0);
}

void RqmcEstimator::step() {
  const std::size_t n0 = static_cast<std::size_t>(cfg_.n0);
  const double i = static_cast<double>(iterations_);
  const int threads = resolve_threads(cfg_.threads);

  parallel_for(static_cast<std::size_t>(cfg_.B), threads, [&](std::size_t b) {
    std::vector<double> pts(n0 * dim_);
    if (cfg_.method == PointSet::sobol) {
      streams_[b].next(n0, pts);
      for (double& x : pts) x += kHalfCell;
    } else {
      std::mt19937_64 rng(derive_seed(rng_seeds_[b], static_cast<std::uint64_t>(iterations_)));
      for (double& x : pts) x = to_unit(rng()) + kHalfCell;
    }
    std::vector<double> values(n0 * outputs_);
    for (std::size_t k = 0; k < n0; ++k) {
      std::span<const double> u(pts.data() + k * dim_, dim_);
      std::span<double> out(values.data() + k * outputs_, outputs_);
      g_(u, out);
      for (std::size_t o = 0; o < outputs_; ++o) {
        if (std::isnan(out[o])) {
          std::ostringstream msg;
          msg << "integrand returned NaN at u = (";
          for (int d = 0; d < dim_; ++d) msg << (d ? ", " : "") << u[d];
          msg << ")";
          throw DomainError(msg.str());
        }
      }
    }
    for (std::size_t o = 0; o < outputs_; ++o) {
      double& mean = means_[b * outputs_ + o];
      if (space_ == Space::plain) {
        double s = 0.0;
        for (std::size_t k = 0; k < n0; ++k) s += values[k * outputs_ + o];
        const double batch = s / static_cast<double>(n0);
        mean = iterations_ == 0 ? batch : (i * mean + batch) / (i + 1.0);
      } else {
        double mx = -kInf;
        for (std::size_t k = 0; k < n0; ++k) mx = std::max(mx, values[k * outputs_ + o]);
        double batch = mx;
        if (std::isfinite(mx)) {
          double s = 0.0;
          for (std::size_t k = 0; k < n0; ++k) s += std::exp(values[k * outputs_ + o] - mx);
          batch = mx + std::log(s / static_cast<double>(n0));
        }
        if (iterations_ == 0) {
          mean = batch;
        } else {
          const double m = std::max(mean, batch);
          if (m == -kInf || m == kInf) {
            mean = m;
          } else {
            mean = m + std::log((i * std::exp(mean - m) + std::exp(batch - m)) / (i + 1.0));
          }
        }
      }
    }
  });
  ++iterations_;
  n_ += cfg_.n0;
}

std::vector<double> RqmcEstimator::randomization_estimates(std::size_t output) const {
  std::vector<double> r(cfg_.B);
  for (int b = 0; b < cfg_.B; ++b) r[b] = means_[static_cast<std::size_t>(b) * outputs_ + output];
  return r;
}

RqmcResult RqmcEstimator::result(std::size_t output) const {
  const std::vector<double> r = randomization_estimates(output);
  RqmcResult res;
  res.n = n_;
  res.iterations = iterations_;
  const bool all_equal = std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; });
  if (space_ == Space::plain) {
    res.estimate = std::accumulate(r.begin(), r.end(), 0.0) / cfg_.B;
  } else {
    res.estimate = all_equal ? r[0] : log_mean_exp(r);
  }
  if (all_equal) {
    res.error = 0.0;
  } else {
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / cfg_.B;
    double ss = 0.0;
    for (double x : r) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (cfg_.B - 1));
    res.error = std::isfinite(sd) ? cfg_.ci_mult * sd / std::sqrt(static_cast<double>(cfg_.B)) : kInf;
  }
  res.converged = meets_tolerance(output);
  return res;
}

bool RqmcEstimator::meets_tolerance(std::size_t output) const {
  const std::vector<double> r = randomization_estimates(output);
  if (std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; })) return true;
  const double mean = std::accumulate(r.begin(), r.end(), 0.0) / cfg_.B;
  double ss = 0.0;
  for (double x : r) ss += (x - mean) * (x - mean);
  const double err = cfg_.ci_mult * std::sqrt(ss / (cfg_.B - 1)) / std::sqrt(static_cast<double>(cfg_.B));
  if (!std::isfinite(err)) return false;
  if (cfg_.tol_type == ToleranceType::relative) {
    double est = mean;
    if (space_ == Space::log) est = log_mean_exp(r);
    if (std::abs(est) >= 1e-16) return err / std::abs(est) <= cfg_.tol;
  }
  return err <= cfg_.tol;
}

bool RqmcEstimator::all_meet_tolerance() const {
  for (std::size_t o = 0; o < outputs_; ++o)
    if (!meets_tolerance(o)) return false;
  return true;
}

namespace {

RqmcResult run_single(const Integrand& g, int dim, const RqmcConfig& cfg, std::uint64_t seed,
                      RqmcEstimator::Space space) {
  VectorIntegrand vg = [&g](std::span<const double> u, std::span<double> out) { out[0] = g(u); };
  RqmcEstimator est(vg, dim, 1, cfg, seed, space);
  est.step();
  while (!est.meets_tolerance(0) && est.iterations() <= cfg.i_max) est.step();
  return est.result(0);
}

}  // namespace

RqmcResult rqmc_estimate(const Integrand& g, int dim, const RqmcConfig& cfg, std::uint64_t seed) {
  return run_single(g, dim, cfg, seed, RqmcEstimator::Space::plain);
}

RqmcResult rqmc_log_estimate(const Integrand& log_g, int dim, const RqmcConfig& cfg,
                             std::uint64_t seed) {
  return run_single(log_g, dim, cfg, seed, RqmcEstimator::Space::log);
}

std::vector<RqmcResult> rqmc_log_estimate_batch(const VectorIntegrand& log_g, std::size_t outputs,
                                                int dim, const RqmcConfig& cfg,
                                                std::uint64_t seed) {
  std::vector<RqmcResult> results(outputs);
  if (outputs == 0) return results;
  // Outputs that meet the tolerance are frozen at that iteration.
  RqmcEstimator est(log_g, dim, outputs, cfg, seed, RqmcEstimator::Space::log);
  std::vector<bool> done(outputs, false);
  est.step();
  for (;;) {
    bool all = true;
    for (std::size_t o = 0; o < outputs; ++o) {
      if (done[o]) continue;
      if (est.meets_tolerance(o)) {
        results[o] = est.result(o);
        done[o] = true;
      } else {
        all = false;
      }
    }
    if (all || est.iterations() > cfg.i_max) break;
    est.step();
  }
  for (std::size_t o = 0; o < outputs; ++o)
    if (!done[o]) results[o] = est.result(o);
  return results;
}

}  // namespace nvmix
