#include "nvmix/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nvmix/error.hpp"
#include "nvmix/special.hpp"

namespace nvmix {

namespace {

constexpr double kPivotEps = 1e-12;
constexpr double kClampLo = 1e-16;
constexpr double kClampHi = 1.0 - 1e-16;

double clamp_p(double p) { return std::clamp(p, kClampLo, kClampHi); }

// x / sqrt(w) with x / 0 read as a limit.
double scale_limit(double x, double inv_sqrt_w) {
  if (x == 0.0) return 0.0;
  return x * inv_sqrt_w;
}

// Probability of (lo, hi] under N(0,1) and a draw from it driven by u.
double truncated_normal_step(double lo, double hi, double u, double* y) {
  double p;
  if (lo > 0.0) {
    const double d = norm_cdf(-hi);
    const double e = norm_cdf(-lo);
    p = e - d;
    if (y) *y = -norm_quantile(clamp_p(e - u * (e - d)));
  } else {
    const double d = norm_cdf(lo);
    const double e = norm_cdf(hi);
    p = e - d;
    if (y) *y = norm_quantile(clamp_p(d + u * (e - d)));
  }
  return std::max(p, 0.0);
}

void check_limits(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, int d) {
  if (lower.size() != d || upper.size() != d) {
    std::ostringstream msg;
    msg << "limits have length " << lower.size() << " and " << upper.size() << ", expected " << d;
    throw DomainError(msg.str());
  }
  for (int i = 0; i < d; ++i) {
    if (std::isnan(lower(i)) || std::isnan(upper(i)))
      throw DomainError("integration limit is NaN at index " + std::to_string(i));
    if (lower(i) > upper(i)) {
      std::ostringstream msg;
      msg << "lower limit exceeds upper limit at index " << i << " (" << lower(i) << " > "
          << upper(i) << ")";
      throw DomainError(msg.str());
    }
  }
}

RqmcResult exact(double value) {
  RqmcResult r;
  r.estimate = value;
  r.error = 0.0;
  r.converged = true;
  return r;
}

struct Reduced {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::MatrixXd sigma;
  bool empty = false;
  bool all_free = false;
};

// Centres the limits and drops coordinates that are unconstrained on both sides.
Reduced reduce(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, const NvmModel& model) {
  const int d = model.dim();
  check_limits(lower, upper, d);
  Reduced r;
  std::vector<int> keep;
  for (int i = 0; i < d; ++i) {
    if (lower(i) == upper(i)) r.empty = true;
    if (lower(i) == -kInf && upper(i) == kInf) continue;
    keep.push_back(i);
  }
  r.all_free = keep.empty();
  const int k = static_cast<int>(keep.size());
  r.lower.resize(k);
  r.upper.resize(k);
  r.sigma.resize(k, k);
  for (int i = 0; i < k; ++i) {
    r.lower(i) = lower(keep[i]) - model.loc()(keep[i]);
    r.upper(i) = upper(keep[i]) - model.loc()(keep[i]);
    for (int j = 0; j < k; ++j) r.sigma(i, j) = model.scale()(keep[i], keep[j]);
  }
  return r;
}

class GenzIntegrand {
 public:
  GenzIntegrand(const OrderedProblem& p, const MixtureSpec& mix) : p_(p), mix_(mix) {}

  // u or its reflection 1 - u when flip is set.
  double operator()(std::span<const double> u, bool flip) const {
    const int d = static_cast<int>(p_.lower.size());
    const double u0 = u[0];
    const double w = mix_.quantile(flip ? Prob{1.0 - u0, u0} : Prob{u0, 1.0 - u0});
    const double inv = 1.0 / std::sqrt(w);
    std::vector<double> y(d);
    double g = 1.0;
    for (int i = 0; i < d; ++i) {
      double shift = 0.0;
      for (int j = 0; j < i; ++j) shift += p_.factor(i, j) * y[j];
      const double c = p_.factor(i, i);
      const double lo = (scale_limit(p_.lower(i), inv) - shift) / c;
      const double hi = (scale_limit(p_.upper(i), inv) - shift) / c;
      const bool last = i == d - 1;
      const double ui = last ? 0.5 : (flip ? 1.0 - u[i + 1] : u[i + 1]);
      g *= truncated_normal_step(lo, hi, ui, last ? nullptr : &y[i]);
      if (g == 0.0) return 0.0;
    }
    return g;
  }

 private:
  const OrderedProblem& p_;
  const MixtureSpec& mix_;
};

}  // namespace

OrderedProblem natural_order(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             const Eigen::MatrixXd& sigma) {
  const int d = static_cast<int>(sigma.rows());
  check_limits(lower, upper, d);
  const ScaleFactor f = cholesky(sigma);
  OrderedProblem p;
  p.lower = lower;
  p.upper = upper;
  p.factor = f.lower;
  p.perm.resize(d);
  for (int i = 0; i < d; ++i) p.perm[i] = i;
  p.y = Eigen::VectorXd::Zero(d);
  return p;
}

OrderedProblem reorder(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                       const Eigen::MatrixXd& sigma, double mean_sqrt_w) {
  check_scale_matrix(sigma);
  const int d = static_cast<int>(sigma.rows());
  check_limits(lower, upper, d);
  if (!(mean_sqrt_w > 0.0)) throw DomainError("E[sqrt(W)] must be positive");

  OrderedProblem p;
  p.lower = lower / mean_sqrt_w;
  p.upper = upper / mean_sqrt_w;
  Eigen::MatrixXd S = sigma;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(d, d);
  p.y = Eigen::VectorXd::Zero(d);
  p.perm.resize(d);
  for (int i = 0; i < d; ++i) p.perm[i] = i;

  for (int j = 0; j < d; ++j) {
    int best = j;
    double best_p = kInf;
    for (int l = j; l < d; ++l) {
      double ss = S(l, l);
      double shift = 0.0;
      for (int k = 0; k < j; ++k) {
        ss -= C(l, k) * C(l, k);
        shift += C(l, k) * p.y(k);
      }
      const double denom = std::sqrt(std::max(ss, kPivotEps));
      const double pr = norm_interval((p.lower(l) - shift) / denom, (p.upper(l) - shift) / denom);
      if (pr < best_p) {
        best_p = pr;
        best = l;
      }
    }
    if (best != j) {
      std::swap(p.perm[j], p.perm[best]);
      std::swap(p.lower(j), p.lower(best));
      std::swap(p.upper(j), p.upper(best));
      S.row(j).swap(S.row(best));
      S.col(j).swap(S.col(best));
      C.row(j).head(j).swap(C.row(best).head(j));
    }
    double ss = S(j, j);
    for (int k = 0; k < j; ++k) ss -= C(j, k) * C(j, k);
    if (ss < kPivotEps) ++p.clamped_pivots;
    C(j, j) = std::sqrt(std::max(ss, kPivotEps));
    for (int l = j + 1; l < d; ++l) {
      double s = S(l, j);
      for (int k = 0; k < j; ++k) s -= C(j, k) * C(l, k);
      C(l, j) = s / C(j, j);
    }
    double shift = 0.0;
    for (int k = 0; k < j; ++k) shift += C(j, k) * p.y(k);
    const double a = (p.lower(j) - shift) / C(j, j);
    const double b = (p.upper(j) - shift) / C(j, j);
    const double mass = norm_interval(a, b);
    if (mass > 0.0) {
      const double pa = a == -kInf ? 0.0 : norm_pdf(a);
      const double pb = b == kInf ? 0.0 : norm_pdf(b);
      p.y(j) = (pa - pb) / mass;
    } else {
      // Zero-width interval: use the midpoint, or the finite end.
      if (std::isfinite(a) && std::isfinite(b)) p.y(j) = 0.5 * (a + b);
      else p.y(j) = std::isfinite(a) ? a : b;
    }
  }
  // Limits are returned in the original units.
  p.lower *= mean_sqrt_w;
  p.upper *= mean_sqrt_w;
  p.factor = C;
  return p;
}

double integrand_g(std::span<const double> u, const OrderedProblem& problem,
                   const MixtureSpec& mix) {
  return GenzIntegrand(problem, mix)(u, false);
}

RqmcResult prob(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, const NvmModel& model,
                const RqmcConfig& cfg, std::uint64_t seed, const ProbOptions& options) {
  if (!model.full_rank()) return prob_singular(lower, upper, model, cfg, seed, options);
  const Reduced r = reduce(lower, upper, model);
  if (r.empty) return exact(0.0);
  if (r.all_free) return exact(1.0);
  const int d = static_cast<int>(r.lower.size());

  const OrderedProblem problem =
      options.reorder ? reorder(r.lower, r.upper, r.sigma, mean_sqrt_w(model.mixture(), options.n_pilot))
                      : natural_order(r.lower, r.upper, r.sigma);
  const GenzIntegrand g(problem, model.mixture());
  Integrand f;
  if (options.antithetic) {
    f = [&g](std::span<const double> u) { return 0.5 * (g(u, false) + g(u, true)); };
  } else {
    f = [&g](std::span<const double> u) { return g(u, false); };
  }
  return rqmc_estimate(f, d, cfg, seed);
}

RqmcResult prob_singular(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                         const NvmModel& model, const RqmcConfig& cfg, std::uint64_t seed,
                         const ProbOptions& options) {
  const Reduced red = reduce(lower, upper, model);
  if (red.empty) return exact(0.0);
  if (red.all_free) return exact(1.0);
  const ScaleFactor f = singular_cholesky(red.sigma);
  const int d = f.dim();
  const int rank = f.rank;

  // Deterministic rows: X_i equals its location exactly.
  for (int i = f.block_start[rank]; i < d; ++i) {
    const int src = f.perm[i];
    if (!(red.lower(src) < 0.0 && 0.0 <= red.upper(src))) return exact(0.0);
  }
  if (rank == 0) return exact(1.0);

  // Each row divided by its own-level coefficient; negative coefficients swap the limits.
  const int m = f.block_start[rank];
  Eigen::VectorXd lo(m), hi(m);
  Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(m, rank);
  for (int i = 0; i < m; ++i) {
    const int src = f.perm[i];
    const double s = f.row_scale(i);
    const double a = red.lower(src) / s;
    const double b = red.upper(src) / s;
    lo(i) = std::min(a, b);
    hi(i) = std::max(a, b);
    coef.row(i) = f.lower.row(i) / s;
  }
  const MixtureSpec& mix = model.mixture();
  auto eval = [&](std::span<const double> u, bool flip) {
    const double u0 = u[0];
    const double w = mix.quantile(flip ? Prob{1.0 - u0, u0} : Prob{u0, 1.0 - u0});
    const double inv = 1.0 / std::sqrt(w);
    std::vector<double> y(rank);
    double g = 1.0;
    for (int l = 0; l < rank; ++l) {
      double a = -kInf, b = kInf;
      for (int i = f.block_start[l]; i < f.block_start[l + 1]; ++i) {
        double shift = 0.0;
        for (int j = 0; j < l; ++j) shift += coef(i, j) * y[j];
        a = std::max(a, scale_limit(lo(i), inv) - shift);
        b = std::min(b, scale_limit(hi(i), inv) - shift);
      }
      if (a >= b) return 0.0;
      const bool last = l == rank - 1;
      const double ul = last ? 0.5 : (flip ? 1.0 - u[l + 1] : u[l + 1]);
      g *= truncated_normal_step(a, b, ul, last ? nullptr : &y[l]);
      if (g == 0.0) return 0.0;
    }
    return g;
  };
  Integrand fn;
  if (options.antithetic) {
    fn = [&eval](std::span<const double> u) { return 0.5 * (eval(u, false) + eval(u, true)); };
  } else {
    fn = [&eval](std::span<const double> u) { return eval(u, false); };
  }
  return rqmc_estimate(fn, rank, cfg, seed);
}

}  // namespace nvmix
