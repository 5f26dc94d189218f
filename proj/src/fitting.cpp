#include "nvmix/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "nvmix/error.hpp"
#include "nvmix/linalg.hpp"
#include "nvmix/special.hpp"

namespace nvmix {

namespace {

// Admissible range of positive parameters during the searches, in log scale.
constexpr double kLogParamMin = -4.6;   // 0.01
constexpr double kLogParamMax = 6.9;    // 1000
constexpr double kLogScaleBound = 18.4; // c in (1e-8, 1e8)

std::vector<double> default_start(const MixtureSpec& mix) {
  switch (mix.kind()) {
    case MixtureKind::inverse_gamma: return {5.0};
    case MixtureKind::pareto: return {2.0};
    case MixtureKind::inverse_burr: return {2.0, 2.0};
    case MixtureKind::constant: return {};
    default: return std::vector<double>(mix.num_free_params(), 1.0);
  }
}

std::vector<double> free_params(const MixtureSpec& mix) {
  const auto& p = mix.params();
  return {p.begin(), p.begin() + static_cast<std::ptrdiff_t>(mix.num_free_params())};
}

Eigen::VectorXd squared_distances(const Eigen::MatrixXd& X, const Eigen::VectorXd& mu,
                                  const Eigen::MatrixXd& sigma) {
  return mahalanobis_sq_rows(X, mu, cholesky(sigma));
}

void check_distances(const Eigen::VectorXd& d2) {
  for (Eigen::Index i = 0; i < d2.size(); ++i) {
    if (!std::isfinite(d2(i))) {
      std::ostringstream msg;
      msg << "non-finite Mahalanobis distance for observation " << i;
      throw DomainError(msg.str());
    }
  }
}

Eigen::VectorXd analytic_weights(const Eigen::VectorXd& d2, int dim, const MixtureSpec& mix) {
  Eigen::VectorXd w(d2.size());
  const double d = dim;
  for (Eigen::Index i = 0; i < d2.size(); ++i) {
    switch (mix.kind()) {
      case MixtureKind::constant:
        w(i) = 1.0 / mix.params()[0];
        break;
      case MixtureKind::inverse_gamma: {
        const double nu = mix.params()[0];
        w(i) = (nu + d) / (nu + d2(i));
        break;
      }
      case MixtureKind::pareto: {
        // 1/W given X is gamma(alpha + d/2, rate D^2/2) truncated to (0,1).
        const double a = mix.params()[0] + 0.5 * d;
        const double x = 0.5 * d2(i);
        w(i) = std::exp(log_scaled_lower_gamma(a + 1.0, x) - log_scaled_lower_gamma(a, x));
        break;
      }
      default:
        throw UnsupportedError("no closed-form weights for mixture " + mix.name());
    }
  }
  return w;
}

Eigen::VectorXd estimated_weights(const Eigen::VectorXd& d2, int dim, const MixtureSpec& mix,
                                  const DensityConfig& cfg, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(d2.size());
  std::vector<DensityIntegrandParams> params;
  params.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i)
    params.push_back({d2(i), dim, 0.0, 0.5 * dim + 1.0});
  for (std::size_t i = 0; i < n; ++i) params.push_back(DensityIntegrandParams::density(d2(i), dim, 0.0));
  const std::vector<RqmcResult> r = log_integral_batch(params, mix, cfg, seed);
  Eigen::VectorXd w(d2.size());
  for (std::size_t i = 0; i < n; ++i) w(i) = std::exp(r[i].estimate - r[n + i].estimate);
  return w;
}

bool uses_closed_form(const MixtureSpec& mix, const FitConfig& cfg) {
  return cfg.analytic && has_closed_density(mix);
}

}  // namespace

double rel_diff(std::span<const double> old_value, std::span<const double> new_value) {
  if (old_value.size() != new_value.size()) throw DomainError("rel_diff: lengths differ");
  double m = 0.0;
  for (std::size_t i = 0; i < old_value.size(); ++i)
    m = std::max(m, std::abs(old_value[i] - new_value[i]) / std::max(std::abs(old_value[i]), 1e-10));
  return m;
}

double rel_diff(const Eigen::MatrixXd& old_value, const Eigen::MatrixXd& new_value) {
  if (old_value.rows() != new_value.rows() || old_value.cols() != new_value.cols())
    throw DomainError("rel_diff: shapes differ");
  return rel_diff(std::span<const double>(old_value.data(), old_value.size()),
                  std::span<const double>(new_value.data(), new_value.size()));
}

Eigen::VectorXd weights(const Eigen::VectorXd& d2, int dim, const MixtureSpec& mix,
                        const FitConfig& cfg, std::uint64_t seed) {
  check_distances(d2);
  if (mix.kind() != MixtureKind::blackbox && mix.kind() != MixtureKind::inverse_burr &&
      (cfg.analytic || mix.kind() == MixtureKind::constant))
    return analytic_weights(d2, dim, mix);
  return estimated_weights(d2, dim, mix, cfg.likelihood, seed);
}

Eigen::VectorXd weights(const Eigen::MatrixXd& X, const Eigen::VectorXd& mu,
                        const Eigen::MatrixXd& sigma, const MixtureSpec& mix, const FitConfig& cfg,
                        std::uint64_t seed) {
  return weights(squared_distances(X, mu, sigma), static_cast<int>(X.cols()), mix, cfg, seed);
}

WeightCache::WeightCache(int dim, const MixtureSpec& mix, const FitConfig& cfg)
    : dim_(dim), mix_(mix), cfg_(cfg) {}

Eigen::VectorXd WeightCache::operator()(const Eigen::VectorXd& d2, std::uint64_t seed) {
  check_distances(d2);
  const bool analytic = cfg_.analytic && mix_.kind() != MixtureKind::blackbox &&
                        mix_.kind() != MixtureKind::inverse_burr;
  if (analytic || mix_.kind() == MixtureKind::constant || !cfg_.interpolate_weights) {
    estimated_ += d2.size();
    return weights(d2, dim_, mix_, cfg_, seed);
  }
  Eigen::VectorXd out(d2.size());
  std::vector<Eigen::Index> missing;
  for (Eigen::Index i = 0; i < d2.size(); ++i) {
    const double x = d2(i);
    auto hi = std::lower_bound(knots_.begin(), knots_.end(), std::pair{x, -kInf});
    if (hi != knots_.end() && hi->first == x) {
      out(i) = hi->second;
      ++interpolated_;
      continue;
    }
    if (hi != knots_.begin() && hi != knots_.end()) {
      const auto lo = std::prev(hi);
      if (hi->first - lo->first <= 0.1 * lo->first) {
        const double t = (x - lo->first) / (hi->first - lo->first);
        out(i) = lo->second + t * (hi->second - lo->second);
        ++interpolated_;
        continue;
      }
    }
    missing.push_back(i);
  }
  if (!missing.empty()) {
    Eigen::VectorXd x(missing.size());
    for (std::size_t k = 0; k < missing.size(); ++k) x(k) = d2(missing[k]);
    const Eigen::VectorXd w = estimated_weights(x, dim_, mix_, cfg_.likelihood, seed);
    for (std::size_t k = 0; k < missing.size(); ++k) {
      out(missing[k]) = w(k);
      knots_.emplace_back(x(k), w(k));
    }
    std::sort(knots_.begin(), knots_.end());
    estimated_ += missing.size();
  }
  return out;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> update_mu_sigma(const Eigen::MatrixXd& X,
                                                            const Eigen::VectorXd& delta,
                                                            const Eigen::VectorXd& mu_current) {
  if (delta.size() != X.rows()) throw DomainError("one weight per observation is needed");
  const double total = delta.sum();
  if (!(total > 0.0) || !std::isfinite(total)) throw DomainError("weights must be positive");
  const Eigen::VectorXd mu = (X.transpose() * delta) / total;
  const Eigen::MatrixXd C = X.rowwise() - mu_current.transpose();
  Eigen::MatrixXd sigma = C.transpose() * delta.asDiagonal() * C / static_cast<double>(X.rows());
  sigma = 0.5 * (sigma + sigma.transpose());
  return {mu, sigma};
}

LogLikelihood log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& mu,
                             const Eigen::MatrixXd& sigma, const MixtureSpec& mix,
                             const FitConfig& cfg, std::uint64_t seed) {
  const ScaleFactor f = cholesky(sigma);
  const Eigen::VectorXd d2 = mahalanobis_sq_rows(X, mu, f);
  check_distances(d2);
  const int d = static_cast<int>(X.cols());
  const double log_det = f.log_det();
  if (uses_closed_form(mix, cfg) || mix.kind() == MixtureKind::constant) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < d2.size(); ++i) s += closed_log_density(mix, d2(i), d, log_det);
    return {s, 0.0};
  }
  std::vector<DensityIntegrandParams> params;
  params.reserve(d2.size());
  for (Eigen::Index i = 0; i < d2.size(); ++i)
    params.push_back(DensityIntegrandParams::density(d2(i), d, log_det));
  LogLikelihood ll{0.0, 0.0};
  for (const RqmcResult& r : log_integral_batch(params, mix, cfg.likelihood, seed)) {
    ll.value += r.estimate;
    ll.error += r.error;
  }
  return ll;
}

SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                          std::vector<double> x0, double step, double x_tol, double f_tol,
                          int max_evals) {
  const std::size_t p = x0.size();
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? kInf : v;
  };
  if (p == 0) return {x0, eval(x0), evals, true};

  std::vector<std::vector<double>> pts(p + 1, x0);
  std::vector<double> vals(p + 1);
  for (std::size_t i = 0; i < p; ++i) pts[i + 1][i] += step;
  for (std::size_t i = 0; i <= p; ++i) vals[i] = eval(pts[i]);

  auto point = [&](const std::vector<double>& c, const std::vector<double>& x, double t) {
    std::vector<double> r(p);
    for (std::size_t j = 0; j < p; ++j) r[j] = c[j] + t * (x[j] - c[j]);
    return r;
  };

  bool converged = false;
  while (evals < max_evals) {
    std::vector<std::size_t> idx(p + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<std::vector<double>> sp;
    std::vector<double> sv;
    for (std::size_t i : idx) {
      sp.push_back(pts[i]);
      sv.push_back(vals[i]);
    }
    pts = std::move(sp);
    vals = std::move(sv);

    double size = 0.0;
    for (std::size_t i = 1; i <= p; ++i)
      for (std::size_t j = 0; j < p; ++j) size = std::max(size, std::abs(pts[i][j] - pts[0][j]));
    if (std::isfinite(vals[p]) &&
        (size <= x_tol || vals[p] - vals[0] <= f_tol * (1.0 + std::abs(vals[0])))) {
      converged = true;
      break;
    }

    std::vector<double> c(p, 0.0);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) c[j] += pts[i][j] / p;

    const std::vector<double> xr = point(c, pts[p], -1.0);
    const double fr = eval(xr);
    if (fr < vals[0]) {
      const std::vector<double> xe = point(c, pts[p], -2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[p] = xe;
        vals[p] = fe;
      } else {
        pts[p] = xr;
        vals[p] = fr;
      }
      continue;
    }
    if (fr < vals[p - 1]) {
      pts[p] = xr;
      vals[p] = fr;
      continue;
    }
    const bool outside = fr < vals[p];
    const std::vector<double> xc = point(c, outside ? xr : pts[p], 0.5);
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[p])) {
      pts[p] = xc;
      vals[p] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= p; ++i) {
      pts[i] = point(pts[0], pts[i], 0.5);
      vals[i] = eval(pts[i]);
    }
  }
  const std::size_t best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  return {pts[best], vals[best], evals, converged};
}

InitialEstimate initial_estimate(const Eigen::MatrixXd& X, const MixtureSpec& mix,
                                 const FitConfig& cfg, std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  const int d = static_cast<int>(X.cols());
  if (n <= d) {
    std::ostringstream msg;
    msg << "fitting needs more observations than dimensions (n = " << n << ", d = " << d << ")";
    throw DomainError(msg.str());
  }
  if (!X.allFinite()) throw DomainError("data contain non-finite values");

  InitialEstimate est;
  est.mu = X.colwise().mean().transpose();
  const Eigen::MatrixXd C = X.rowwise() - est.mu.transpose();
  const Eigen::MatrixXd S = C.transpose() * C / static_cast<double>(n - 1);

  Eigen::MatrixXd Xs = X;
  if (cfg.subsample_size > 0 && cfg.subsample_size < n) {
    std::vector<Eigen::Index> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 0x5ab5));
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(cfg.subsample_size);
    std::sort(rows.begin(), rows.end());
    Xs.resize(cfg.subsample_size, d);
    for (int i = 0; i < cfg.subsample_size; ++i) Xs.row(i) = X.row(rows[i]);
  }

  const std::size_t p = mix.num_free_params();
  std::vector<double> start;
  for (double v : free_params(mix)) start.push_back(std::log(v));
  start.push_back(0.0);

  const std::uint64_t ll_seed = derive_seed(seed, 0x1417);
  auto objective = [&](std::span<const double> x) {
    std::vector<double> nu(p);
    for (std::size_t i = 0; i < p; ++i) {
      if (x[i] < kLogParamMin || x[i] > kLogParamMax) return kInf;
      nu[i] = std::exp(x[i]);
    }
    if (std::abs(x[p]) > kLogScaleBound) return kInf;
    if (!mix.valid_params(nu)) return kInf;
    try {
      const LogLikelihood ll =
          log_likelihood(Xs, est.mu, std::exp(x[p]) * S, mix.with_params(nu), cfg, ll_seed);
      return std::isfinite(ll.value) ? -ll.value : kInf;
    } catch (const Error&) {
      return kInf;
    }
  };

  SimplexResult opt{start, kInf, 0, false};
  try {
    opt = nelder_mead(objective, start, 0.5, 1e-3, 1e-9, 400);
  } catch (const Error&) {
  }
  if (std::isfinite(opt.value)) {
    for (std::size_t i = 0; i < p; ++i) est.nu.push_back(std::exp(opt.x[i]));
    est.c = std::exp(opt.x[p]);
  } else {
    est.nu = default_start(mix);
    est.c = 1.0;
    est.fallback = true;
  }
  est.sigma = est.c * S;
  return est;
}

FitResult fit(const Eigen::MatrixXd& X, const MixtureSpec& mix, const FitConfig& cfg,
              std::uint64_t seed) {
  if (!(cfg.eps_mu > 0.0 && cfg.eps_sigma > 0.0 && cfg.eps_nu > 0.0))
    throw DomainError("convergence thresholds must be positive");
  const int d = static_cast<int>(X.cols());
  const InitialEstimate init = initial_estimate(X, mix, cfg, seed);

  FitResult res;
  res.nu0 = init.nu;
  res.c0 = init.c;
  res.start_fallback = init.fallback;
  std::vector<double> nu = init.nu;
  Eigen::VectorXd mu = init.mu;
  Eigen::MatrixXd sigma = init.sigma;
  const std::size_t p = nu.size();

  for (int k = 0; k < cfg.max_ecme_iter; ++k) {
    FitTraceEntry entry;
    entry.iteration = k + 1;
    if (k == 0 && init.fallback) entry.note = "starting values from family defaults";
    const MixtureSpec mix_k = mix.with_params(nu);

    WeightCache wcache(d, mix_k, cfg);
    entry.inner_converged = false;
    for (int l = 0; l < cfg.max_inner_iter; ++l) {
      const Eigen::VectorXd d2 = squared_distances(X, mu, sigma);
      const Eigen::VectorXd delta =
          wcache(d2, derive_seed(seed, 1000003ULL * (k + 1) + static_cast<std::uint64_t>(l)));
      auto [mu_next, sigma_next] = update_mu_sigma(X, delta, mu);
      entry.rel_mu = rel_diff(std::span<const double>(mu.data(), mu.size()),
                              std::span<const double>(mu_next.data(), mu_next.size()));
      entry.rel_sigma = rel_diff(sigma, sigma_next);
      mu = std::move(mu_next);
      sigma = std::move(sigma_next);
      entry.inner_iterations = l + 1;
      if (entry.rel_mu < cfg.eps_mu && entry.rel_sigma < cfg.eps_sigma) {
        entry.inner_converged = true;
        break;
      }
    }
    if (!entry.inner_converged) {
      if (!entry.note.empty()) entry.note += "; ";
      entry.note += "inner loop reached max_inner_iter";
    }

    // The nu-update maximizes a likelihood estimated with one fixed seed.
    const std::uint64_t ll_seed = derive_seed(seed, 7919ULL * (k + 1));
    auto objective = [&](std::span<const double> x) {
      std::vector<double> v(p);
      for (std::size_t i = 0; i < p; ++i) {
        if (x[i] < kLogParamMin || x[i] > kLogParamMax) return kInf;
        v[i] = std::exp(x[i]);
      }
      if (!mix.valid_params(v)) return kInf;
      try {
        const LogLikelihood ll = log_likelihood(X, mu, sigma, mix.with_params(v), cfg, ll_seed);
        return std::isfinite(ll.value) ? -ll.value : kInf;
      } catch (const Error&) {
        return kInf;
      }
    };
    const LogLikelihood before = log_likelihood(X, mu, sigma, mix_k, cfg, ll_seed);
    entry.loglik_before = before.value;
    entry.loglik_error = before.error;

    std::vector<double> nu_next = nu;
    if (p > 0) {
      std::vector<double> start(p);
      for (std::size_t i = 0; i < p; ++i) start[i] = std::log(nu[i]);
      const SimplexResult opt = nelder_mead(objective, start, 0.2, 1e-3, 1e-10, 200);
      if (std::isfinite(opt.value) && -opt.value >= before.value) {
        for (std::size_t i = 0; i < p; ++i) nu_next[i] = std::exp(opt.x[i]);
        entry.loglik = -opt.value;
      } else {
        entry.loglik = before.value;
      }
      if (!opt.converged) {
        if (!entry.note.empty()) entry.note += "; ";
        entry.note += "nu search stopped at its evaluation limit";
      }
    } else {
      entry.loglik = before.value;
    }
    entry.rel_nu = p > 0 ? rel_diff(nu, nu_next) : 0.0;
    nu = nu_next;
    entry.nu = nu;
    res.trace.push_back(entry);
    if (entry.rel_nu < cfg.eps_nu && (p > 0 || entry.inner_converged)) {
      res.converged = true;
      break;
    }
  }
  res.nu = nu;
  res.mu = mu;
  res.sigma = sigma;
  return res;
}

}  // namespace nvmix
