#include "nvmix/density.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "nvmix/error.hpp"
#include "nvmix/linalg.hpp"
#include "nvmix/special.hpp"

namespace nvmix {

namespace {

constexpr double kLn10 = 2.302585092994045684;
// Logit range with both u and 1 - u normal doubles.
constexpr double kZLimit = 700.0;
// Largest logit whose u is below 1 in double precision; callbacks only see u.
constexpr double kZLimitBlackbox = 36.0;
constexpr double kTinyD2 = 1e-12;
constexpr int kMaxExpansions = 64;

using Knot = QuantileCache::Knot;

bool by_z(const Knot& a, const Knot& b) { return a.z < b.z; }

// u_hi - u_lo for two probabilities, from the side with the smaller values.
double width(const Prob& lo, const Prob& hi) {
  if (hi.p <= 0.5) return hi.p - lo.p;
  if (lo.p >= 0.5) return lo.q - hi.q;
  return 1.0 - lo.p - hi.q;
}

}  // namespace

double DensityIntegrandParams::log_const() const {
  return -0.5 * dim * kLog2Pi - 0.5 * log_det;
}

double DensityIntegrandParams::log_h_max() const {
  const double w = peak_w();
  return log_const() - shift_k * std::log(w) - shift_k;
}

double log_h(double w, const DensityIntegrandParams& p) {
  const double rate = 0.5 * p.d2;
  if (w == 0.0) {
    if (rate > 0.0) return -kInf;
    throw DomainError("density integrand is unbounded at w = 0 when D2 = 0");
  }
  if (w == kInf) return p.shift_k > 0.0 ? -kInf : p.log_const();
  return p.log_const() - p.shift_k * std::log(w) - rate / w;
}

double log_h(Prob u, const DensityIntegrandParams& p, const MixtureSpec& mix) {
  return log_h(mix.quantile(u), p);
}

// ---------------------------------------------------------------- cache

QuantileCache::QuantileCache(const MixtureSpec& mix, const std::vector<Knot>* shared)
    : mix_(mix), shared_(shared) {
  z_min_ = -kZLimit;
  z_max_ = mix.kind() == MixtureKind::blackbox ? kZLimitBlackbox : kZLimit;
}

Knot QuantileCache::eval(double z) {
  z = std::clamp(z, z_min_, z_max_);
  const Prob u = Prob::from_logit(z);
  const Knot k{z, u, mix_.quantile(u)};
  add(k);
  return k;
}

void QuantileCache::add(const Knot& k) {
  local_.insert(std::upper_bound(local_.begin(), local_.end(), k, by_z), k);
}

std::size_t QuantileCache::size() const {
  return local_.size() + (shared_ ? shared_->size() : 0);
}

std::vector<Knot> QuantileCache::sorted_between(double z_lo, double z_hi) const {
  std::vector<Knot> out;
  auto take = [&](const std::vector<Knot>& v) {
    auto first = std::lower_bound(v.begin(), v.end(), Knot{z_lo, {}, 0.0}, by_z);
    auto last = std::upper_bound(v.begin(), v.end(), Knot{z_hi, {}, 0.0}, by_z);
    return std::make_pair(first, last);
  };
  const auto [lf, ll] = take(local_);
  if (!shared_) return {lf, ll};
  const auto [sf, sl] = take(*shared_);
  out.reserve((ll - lf) + (sl - sf));
  std::merge(sf, sl, lf, ll, std::back_inserter(out), by_z);
  return out;
}

std::vector<Knot> QuantileCache::sorted() const { return sorted_between(-kInf, kInf); }

std::optional<Knot> QuantileCache::last_true(const std::function<bool(const Knot&)>& pred,
                                             double z_lo, double z_hi) const {
  std::optional<Knot> best;
  auto scan = [&](const std::vector<Knot>& v) {
    auto first = std::upper_bound(v.begin(), v.end(), Knot{z_lo, {}, 0.0}, by_z);
    auto last = std::lower_bound(first, v.end(), Knot{z_hi, {}, 0.0}, by_z);
    auto it = std::partition_point(first, last, pred);
    if (it != first) {
      const Knot& k = *(it - 1);
      if (!best || k.z > best->z) best = k;
    }
  };
  scan(local_);
  if (shared_) scan(*shared_);
  return best;
}

std::optional<Knot> QuantileCache::first_true(const std::function<bool(const Knot&)>& pred,
                                              double z_lo, double z_hi) const {
  std::optional<Knot> best;
  auto scan = [&](const std::vector<Knot>& v) {
    auto first = std::upper_bound(v.begin(), v.end(), Knot{z_lo, {}, 0.0}, by_z);
    auto last = std::lower_bound(first, v.end(), Knot{z_hi, {}, 0.0}, by_z);
    auto it = std::partition_point(first, last, [&](const Knot& k) { return !pred(k); });
    if (it != last && (!best || it->z < best->z)) best = *it;
  };
  scan(local_);
  if (shared_) scan(*shared_);
  return best;
}

std::optional<Knot> QuantileCache::next_above(double z) const {
  return first_true([](const Knot&) { return true; }, z, kInf);
}

std::optional<Knot> QuantileCache::next_below(double z) const {
  return last_true([](const Knot&) { return true; }, -kInf, z);
}

// ---------------------------------------------------------------- peak and region

namespace {

// Moves outward from `from` in steps that double until pred holds or the
// logit range is exhausted.
std::optional<Knot> expand(QuantileCache& cache, double from, int direction,
                           const std::function<bool(const Knot&)>& pred) {
  const double limit = direction < 0 ? cache.z_min() : cache.z_max();
  double step = 1.0;
  for (int i = 0; i < kMaxExpansions; ++i) {
    double z = from + direction * step;
    if ((direction < 0 && z <= limit) || (direction > 0 && z >= limit)) z = limit;
    const Knot k = cache.eval(z);
    if (pred(k)) return k;
    if (z == limit) return std::nullopt;
    step *= 2.0;
  }
  return std::nullopt;
}

// Bisection between lo (pred false) and hi (pred true) or the reverse; the
// returned pair keeps that orientation with |hi.z - lo.z| <= eps.
std::pair<Knot, Knot> bisect(QuantileCache& cache, Knot a, Knot b,
                             const std::function<bool(const Knot&)>& pred_a, double eps) {
  while (std::abs(b.z - a.z) > eps) {
    const double mid = 0.5 * (a.z + b.z);
    if (mid == a.z || mid == b.z) break;
    const Knot k = cache.eval(mid);
    if (pred_a(k)) a = k;
    else b = k;
  }
  return {a, b};
}

[[noreturn]] void peak_failure(const DensityIntegrandParams& p, const char* side) {
  std::ostringstream msg;
  msg.precision(17);
  msg << "cannot bracket the peak of the density integrand (D2 = " << p.d2
      << "): quantile function does not reach " << p.peak_w() << " on the " << side << " side";
  throw ConvergenceError(msg.str());
}

}  // namespace

Peak find_peak(const DensityIntegrandParams& p, QuantileCache& cache, double eps_bisec) {
  const double target = p.peak_w();
  auto below = [target](const Knot& k) { return k.w <= target; };
  auto above = [target](const Knot& k) { return k.w >= target; };
  auto make = [&](const Knot& k, Boundary at) {
    return Peak{k, at == Boundary::none ? p.log_h_max() : log_h(k.w, p), at};
  };

  std::optional<Knot> lo = cache.last_true(below, -kInf, kInf);
  std::optional<Knot> hi = cache.first_true(above, -kInf, kInf);
  if (!lo) {
    const auto first = cache.next_above(-kInf);
    lo = expand(cache, first ? first->z : 0.0, -1, below);
    if (!lo) {
      // W is bounded below by more than the peak, or the peak lies below the
      // smallest reachable quantile: h decreases along the usable range.
      Peak peak = make(cache.eval(cache.z_min()), Boundary::lower);
      if (cache.mixture().support() != SupportHint::bounded)
        peak.log_outside = p.log_h_max() + std::log(peak.knot.u.p);
      return peak;
    }
    hi = cache.first_true(above, lo->z, kInf);
  }
  if (!hi) {
    const auto last = cache.next_below(kInf);
    hi = expand(cache, last ? last->z : 0.0, 1, above);
    if (!hi) {
      Peak peak = make(cache.eval(cache.z_max()), Boundary::upper);
      if (cache.mixture().support() != SupportHint::bounded)
        peak.log_outside = p.log_h_max() + std::log(peak.knot.u.q);
      return peak;
    }
    lo = cache.last_true(below, -kInf, hi->z);
    if (!lo) lo = cache.next_below(hi->z);
  }
  if (lo->w == target) return make(*lo, Boundary::none);
  if (hi->w == target) return make(*hi, Boundary::none);
  const auto [a, b] = bisect(cache, *lo, *hi, below, eps_bisec);
  return make(log_h(a.w, p) >= log_h(b.w, p) ? a : b, Boundary::none);
}

Region region_bounds(const DensityIntegrandParams& p, QuantileCache& cache, const Peak& peak,
                     double k_th, double eps_bisec) {
  Region r;
  r.log_threshold = peak.log_h_max - k_th * kLn10;
  const double thr = r.log_threshold;
  const double zp = peak.knot.z;
  auto low = [&](const Knot& k) { return log_h(k.w, p) <= thr; };
  auto high = [&](const Knot& k) { return log_h(k.w, p) > thr; };

  if (peak.at != Boundary::lower) {
    std::optional<Knot> outer = cache.last_true(low, -kInf, zp);
    if (!outer) {
      const auto first = cache.next_above(-kInf);
      const double from = first && first->z < zp ? first->z : zp;
      outer = expand(cache, from, -1, low);
    }
    if (outer) {
      auto inner = cache.next_above(outer->z);
      if (!inner || inner->z > zp) inner = peak.knot;
      r.lower = bisect(cache, *outer, *inner, low, eps_bisec).first;
    }
  }
  if (peak.at != Boundary::upper) {
    std::optional<Knot> outer = cache.first_true(low, zp, kInf);
    if (!outer) {
      const auto last = cache.next_below(kInf);
      const double from = last && last->z > zp ? last->z : zp;
      outer = expand(cache, from, 1, low);
    }
    if (outer) {
      auto inner = cache.next_below(outer->z);
      if (!inner || inner->z < zp) inner = peak.knot;
      r.upper = bisect(cache, *inner, *outer, high, eps_bisec).second;
    }
  }
  return r;
}

// ---------------------------------------------------------------- integration

namespace {

// Trapezoidal rule in log space over consecutive knots.
double log_trapezoid(const std::vector<Knot>& knots, const DensityIntegrandParams& p) {
  if (knots.size() < 2) return -kInf;
  double acc = -kInf;
  double prev = log_h(knots[0].w, p);
  for (std::size_t i = 1; i < knots.size(); ++i) {
    const double cur = log_h(knots[i].w, p);
    const double w = width(knots[i - 1].u, knots[i].u);
    if (w > 0.0) acc = log_add_exp(acc, std::log(0.5 * w) + log_add_exp(prev, cur));
    prev = cur;
  }
  return acc;
}

// Integral over u in (F(z_lo), F(z_hi)) sampled uniformly in the logit z,
// with du = u (1 - u) dz.
RqmcResult logit_rqmc(const DensityIntegrandParams& p, const MixtureSpec& mix, double z_lo,
                      double z_hi, const RqmcConfig& cfg, std::uint64_t seed) {
  const double len = z_hi - z_lo;
  RqmcResult r = rqmc_log_estimate(
      [&](std::span<const double> v) {
        const Prob u = Prob::from_logit(z_lo + v[0] * len);
        return log_h(mix.quantile(u), p) + std::log(u.p) + std::log(u.q);
      },
      1, cfg, seed);
  r.estimate += std::log(len);
  return r;
}

RqmcResult adaptive(const DensityIntegrandParams& p, const MixtureSpec& mix,
                    const std::vector<Knot>& shared, const DensityConfig& cfg,
                    std::uint64_t seed) {
  QuantileCache cache(mix, &shared);
  const Peak peak = find_peak(p, cache, cfg.eps_bisec);
  const Region region = region_bounds(p, cache, peak, cfg.k_th, cfg.eps_bisec);

  double left = -kInf, right = -kInf;
  if (region.lower) left = log_trapezoid(cache.sorted_between(-kInf, region.lower->z), p);
  if (region.upper) right = log_trapezoid(cache.sorted_between(region.upper->z, kInf), p);

  const double z_lo = region.lower ? region.lower->z : cache.z_min();
  const double z_hi = region.upper ? region.upper->z : cache.z_max();
  RqmcResult mid = logit_rqmc(p, mix, z_lo, z_hi, cfg.rqmc, seed);
  RqmcResult out = mid;
  out.estimate = log_add_exp(log_add_exp(left, mid.estimate), right);
  // Mass beyond the reachable logits must be negligible at the tolerance.
  if (peak.log_outside - out.estimate > std::log(cfg.rqmc.tol))
    peak_failure(p, peak.at == Boundary::lower ? "lower" : "upper");
  return out;
}

double closed_form(const MixtureSpec& mix, const DensityIntegrandParams& p) {
  const double a = mix.params()[0];
  switch (mix.kind()) {
    case MixtureKind::constant:
      return p.log_const() - p.shift_k * std::log(a) - 0.5 * p.d2 / a;
    default:
      return kNaN;
  }
}

}  // namespace

std::vector<RqmcResult> log_integral_batch(std::span<const DensityIntegrandParams> params,
                                           const MixtureSpec& mix, const DensityConfig& cfg,
                                           std::uint64_t seed) {
  const std::size_t n = params.size();
  std::vector<RqmcResult> out(n);
  for (const auto& p : params) {
    if (!(p.d2 >= 0.0)) throw DomainError("squared distance must be non-negative");
    if (p.dim < 1) throw DomainError("dimension must be positive");
  }
  if (n == 0) return out;
  if (mix.kind() == MixtureKind::constant) {
    for (std::size_t i = 0; i < n; ++i) {
      out[i].estimate = closed_form(mix, params[i]);
      out[i].converged = true;
    }
    return out;
  }

  std::vector<std::size_t> regular;
  for (std::size_t i = 0; i < n; ++i) {
    if (params[i].d2 < kTinyD2) {
      // h is monotone in u; no region splitting.
      QuantileCache range(mix);
      out[i] = logit_rqmc(params[i], mix, range.z_min(), range.z_max(), cfg.rqmc,
                          derive_seed(seed, n + i));
    }
    else regular.push_back(i);
  }
  if (regular.empty()) return out;

  // First pass: all inputs share the points and hence the quantile evaluations.
  std::vector<Knot> shared;
  std::mutex lock;
  const std::size_t m = regular.size();
  VectorIntegrand pilot = [&](std::span<const double> v, std::span<double> vals) {
    const Prob u = Prob::from_p(v[0]);
    const Knot k{u.logit(), u, mix.quantile(u)};
    {
      std::lock_guard<std::mutex> g(lock);
      shared.push_back(k);
    }
    for (std::size_t j = 0; j < m; ++j) vals[j] = log_h(k.w, params[regular[j]]);
  };
  RqmcConfig pilot_cfg = cfg.rqmc;
  pilot_cfg.i_max = std::max(0, cfg.pilot_batches - 1);
  const std::vector<RqmcResult> first = rqmc_log_estimate_batch(pilot, m, 1, pilot_cfg, seed);

  std::sort(shared.begin(), shared.end(), by_z);
  std::vector<std::size_t> todo;
  for (std::size_t j = 0; j < m; ++j) {
    if (first[j].converged) out[regular[j]] = first[j];
    else todo.push_back(regular[j]);
  }
  RqmcConfig serial = cfg.rqmc;
  serial.threads = 1;
  DensityConfig inner = cfg;
  inner.rqmc = serial;
  parallel_for(todo.size(), resolve_threads(cfg.rqmc.threads), [&](std::size_t t) {
    const std::size_t i = todo[t];
    out[i] = adaptive(params[i], mix, shared, inner, derive_seed(seed, i));
  });
  return out;
}

std::vector<RqmcResult> log_density_batch(const Eigen::MatrixXd& X, const NvmModel& model,
                                          const DensityConfig& cfg, std::uint64_t seed) {
  if (!model.full_rank()) throw DomainError("density does not exist for a singular scale matrix");
  if (X.cols() != model.dim()) {
    std::ostringstream msg;
    msg << "points have " << X.cols() << " columns, expected " << model.dim();
    throw DomainError(msg.str());
  }
  const Eigen::VectorXd d2 = mahalanobis_sq_rows(X, model.loc(), model.factor());
  const double log_det = model.log_det();
  std::vector<DensityIntegrandParams> params(d2.size());
  for (Eigen::Index i = 0; i < d2.size(); ++i)
    params[i] = DensityIntegrandParams::density(d2(i), model.dim(), log_det);
  return log_integral_batch(params, model.mixture(), cfg, seed);
}

bool has_closed_density(const MixtureSpec& mix) {
  return mix.kind() == MixtureKind::constant || mix.kind() == MixtureKind::inverse_gamma ||
         mix.kind() == MixtureKind::pareto;
}

double closed_log_density(const MixtureSpec& mix, double d2, int dim, double log_det) {
  const double d = dim;
  switch (mix.kind()) {
    case MixtureKind::constant: {
      const double c = mix.params()[0];
      return -0.5 * d * (kLog2Pi + std::log(c)) - 0.5 * log_det - 0.5 * d2 / c;
    }
    case MixtureKind::inverse_gamma: {
      const double nu = mix.params()[0];
      return log_gamma(0.5 * (nu + d)) - log_gamma(0.5 * nu) - 0.5 * d * std::log(nu * M_PI) -
             0.5 * log_det - 0.5 * (nu + d) * std::log1p(d2 / nu);
    }
    case MixtureKind::pareto: {
      const double alpha = mix.params()[0];
      return std::log(alpha) - 0.5 * d * kLog2Pi - 0.5 * log_det +
             log_scaled_lower_gamma(alpha + 0.5 * d, 0.5 * d2);
    }
    default:
      throw UnsupportedError("no closed-form density for mixture " + mix.name());
  }
}

double closed_log_density(const NvmModel& model, const Eigen::VectorXd& x) {
  return closed_log_density(model.mixture(), mahalanobis_sq(x, model.loc(), model.factor()),
                            model.dim(), model.log_det());
}

}  // namespace nvmix
