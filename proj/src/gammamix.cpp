#include "nvmix/gammamix.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "nvmix/error.hpp"
#include "nvmix/special.hpp"

namespace nvmix {

namespace {

void check_dim(int dim) {
  if (dim < 1) throw DomainError("dimension must be at least 1");
}

void check_prob(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    std::ostringstream msg;
    msg << "probability " << u << " outside (0,1)";
    throw DomainError(msg.str());
  }
}

// W realizations from B randomized Sobol' streams; grows by n0 per stream.
class MixingSample {
 public:
  MixingSample(const MixtureSpec& mix, const RqmcConfig& cfg, std::uint64_t seed)
      : mix_(mix), cfg_(cfg), w_(cfg.B) {
    for (int b = 0; b < cfg.B; ++b) streams_.emplace_back(1, derive_seed(seed, b));
    grow();
  }

  void grow() {
    std::vector<double> v(cfg_.n0);
    for (int b = 0; b < cfg_.B; ++b) {
      streams_[b].next(cfg_.n0, v);
      for (double x : v) w_[b].push_back(mix_.quantile(Prob::from_p(x + 0x1p-54)));
    }
    ++batches_;
  }

  bool can_grow() const { return batches_ <= cfg_.i_max; }
  const std::vector<std::vector<double>>& values() const { return w_; }

 private:
  const MixtureSpec& mix_;
  RqmcConfig cfg_;
  std::vector<SobolStream> streams_;
  std::vector<std::vector<double>> w_;
  int batches_ = 0;
};

// Distribution function E[G(q, W)] and density E[g(q, W)] of a mixture,
// estimated on a MixingSample.
class MixtureCdf {
 public:
  using Term = std::function<double(double q, double w)>;

  MixtureCdf(MixingSample& sample, const RqmcConfig& cfg, Term cdf, Term log_pdf)
      : sample_(sample), cfg_(cfg), cdf_(std::move(cdf)), log_pdf_(std::move(log_pdf)) {}

  // Grows the sample until the error bound meets the tolerance.
  double cdf(double q) {
    for (;;) {
      const auto& w = sample_.values();
      std::vector<double> means(w.size());
      for (std::size_t b = 0; b < w.size(); ++b) {
        double s = 0.0;
        for (double x : w[b]) s += cdf_(q, x);
        means[b] = s / static_cast<double>(w[b].size());
      }
      const double mean = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
      double ss = 0.0;
      for (double m : means) ss += (m - mean) * (m - mean);
      const double err = cfg_.ci_mult * std::sqrt(ss / (means.size() - 1)) /
                         std::sqrt(static_cast<double>(means.size()));
      if (err <= cfg_.tol || !sample_.can_grow()) return mean;
      sample_.grow();
    }
  }

  double log_pdf(double q) const {
    std::vector<double> terms;
    for (const auto& row : sample_.values())
      for (double x : row) terms.push_back(log_pdf_(q, x));
    return log_mean_exp(terms);
  }

 private:
  MixingSample& sample_;
  RqmcConfig cfg_;
  Term cdf_;
  Term log_pdf_;
};

// Newton iteration with a log-space step, kept inside a shrinking bracket.
double newton(MixtureCdf& F, double u, double q, double lo, double hi, const QuantileConfig& cfg) {
  for (int it = 0; it < cfg.max_newton; ++it) {
    const double diff = F.cdf(q) - u;
    if (std::abs(diff) <= cfg.newton_tol) return q;
    if (diff > 0.0) hi = q;
    else lo = q;
    const double step = std::exp(std::log(std::abs(diff)) - F.log_pdf(q));
    double next = diff > 0.0 ? q - step : q + step;
    if (!(next > lo && next < hi) || !std::isfinite(next)) {
      if (std::isfinite(lo) && std::isfinite(hi)) next = 0.5 * (lo + hi);
      else if (std::isfinite(lo)) next = q + std::max(std::abs(q), 1.0);
      else next = q - std::max(std::abs(q), 1.0);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    }
    q = next;
  }
  std::ostringstream msg;
  msg.precision(17);
  msg << "quantile search for u = " << u << " did not converge in " << cfg.max_newton
      << " Newton steps; last bracket [" << lo << ", " << hi << "]";
  throw ConvergenceError(msg.str());
}

std::vector<std::size_t> sorted_order(std::span<const double> u) {
  std::vector<std::size_t> idx(u.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return u[a] < u[b]; });
  return idx;
}

}  // namespace

RqmcResult pgammamix(double x, const GammaMixParams& params, const RqmcConfig& cfg,
                     std::uint64_t seed) {
  check_dim(params.dim);
  if (!(x > 0.0)) {
    RqmcResult r;
    r.converged = true;
    if (std::isnan(x)) throw DomainError("pgammamix at NaN");
    return r;
  }
  const double a = 0.5 * params.dim;
  const MixtureSpec& mix = params.mix;
  return rqmc_estimate(
      [&](std::span<const double> v) {
        return gamma_p(a, x / (2.0 * mix.quantile(Prob::from_p(v[0]))));
      },
      1, cfg, seed);
}

std::vector<RqmcResult> dgammamix(std::span<const double> x, const GammaMixParams& params,
                                  const DensityConfig& cfg, std::uint64_t seed, bool log_scale) {
  check_dim(params.dim);
  const int d = params.dim;
  const double half = 0.5 * d;
  std::vector<RqmcResult> out(x.size());
  std::vector<DensityIntegrandParams> todo;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || x[i] < 0.0) {
      std::ostringstream msg;
      msg << "dgammamix needs x >= 0, got " << x[i];
      throw DomainError(msg.str());
    }
    if (x[i] == 0.0) {
      out[i].converged = true;
      if (d == 1) {
        out[i].estimate = kInf;
      } else if (d == 2) {
        // E[1 / (2W)]
        out[i] = rqmc_estimate(
            [&](std::span<const double> v) {
              return 0.5 / params.mix.quantile(Prob::from_p(v[0]));
            },
            1, cfg.rqmc, derive_seed(seed, i));
      } else {
        out[i].estimate = 0.0;
      }
      if (log_scale) out[i].estimate = std::log(out[i].estimate);
      continue;
    }
    todo.push_back(DensityIntegrandParams::density(x[i], d, 0.0));
    where.push_back(i);
  }
  const std::vector<RqmcResult> r = log_integral_batch(todo, params.mix, cfg, seed);
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double xi = x[where[k]];
    RqmcResult res = r[k];
    // The D^2 integrand differs from the density integrand by a factor.
    res.estimate += (half - 1.0) * std::log(xi) + half * std::log(M_PI) - log_gamma(half);
    if (!log_scale) {
      res.estimate = std::exp(res.estimate);
      res.error *= res.estimate;
    }
    out[where[k]] = res;
  }
  return out;
}

RqmcResult dgammamix(double x, const GammaMixParams& params, const DensityConfig& cfg,
                     std::uint64_t seed, bool log_scale) {
  return dgammamix(std::span<const double>(&x, 1), params, cfg, seed, log_scale)[0];
}

std::vector<double> qgammamix(std::span<const double> u, const GammaMixParams& params,
                              const QuantileConfig& cfg, std::uint64_t seed) {
  check_dim(params.dim);
  for (double p : u) check_prob(p);
  const double a = 0.5 * params.dim;
  const double lg = log_gamma(a);
  std::vector<double> out(u.size());
  if (u.empty()) return out;
  MixingSample sample(params.mix, cfg.rqmc, seed);
  MixtureCdf F(
      sample, cfg.rqmc, [a](double q, double w) { return gamma_p(a, q / (2.0 * w)); },
      [a, lg](double q, double w) {
        return (a - 1.0) * std::log(q) - q / (2.0 * w) - lg - a * std::log(2.0 * w);
      });
  const double median_w = params.mix.quantile(0.5);
  double prev = -1.0;
  for (std::size_t i : sorted_order(u)) {
    double q0 = prev > 0.0 ? prev : 2.0 * gamma_p_inv(a, u[i]) * median_w;
    if (!(q0 > 0.0) || !std::isfinite(q0)) q0 = params.dim * median_w;
    out[i] = newton(F, u[i], q0, 0.0, kInf, cfg);
    prev = out[i];
  }
  return out;
}

double qgammamix(double u, const GammaMixParams& params, const QuantileConfig& cfg,
                 std::uint64_t seed) {
  return qgammamix(std::span<const double>(&u, 1), params, cfg, seed)[0];
}

std::vector<double> qnvmix(std::span<const double> u, const MixtureSpec& mix,
                           const QuantileConfig& cfg, std::uint64_t seed) {
  for (double p : u) check_prob(p);
  std::vector<double> out(u.size(), 0.0);
  // Solve on the lower half only; the distribution is symmetric.
  std::vector<double> lower(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) lower[i] = u[i] > 0.5 ? 1.0 - u[i] : u[i];
  if (u.empty()) return out;
  MixingSample sample(mix, cfg.rqmc, seed);
  MixtureCdf F(
      sample, cfg.rqmc, [](double q, double w) { return norm_cdf(q / std::sqrt(w)); },
      [](double q, double w) { return log_norm_pdf(q / std::sqrt(w)) - 0.5 * std::log(w); });
  const double scale = std::sqrt(mix.quantile(0.5));
  double prev = 0.0;
  for (std::size_t i : sorted_order(lower)) {
    if (lower[i] == 0.5) {
      out[i] = 0.0;
      continue;
    }
    const double q0 = prev < 0.0 ? prev : norm_quantile(lower[i]) * scale;
    const double q = newton(F, lower[i], q0, -kInf, 0.0, cfg);
    out[i] = u[i] > 0.5 ? -q : q;
    prev = q;
  }
  return out;
}

double qnvmix(double u, const MixtureSpec& mix, const QuantileConfig& cfg, std::uint64_t seed) {
  return qnvmix(std::span<const double>(&u, 1), mix, cfg, seed)[0];
}

RqmcResult shortfall_prob(double u, const NvmModel& model, const QuantileConfig& cfg,
                          std::uint64_t seed) {
  check_prob(u);
  const double q = qnvmix(u, model.mixture(), cfg, seed);
  const int d = model.dim();
  Eigen::VectorXd upper(d);
  for (int i = 0; i < d; ++i) upper(i) = model.loc()(i) + std::sqrt(model.scale()(i, i)) * q;
  return prob(Eigen::VectorXd::Constant(d, -kInf), upper, model, cfg.rqmc, derive_seed(seed, 1));
}

}  // namespace nvmix
