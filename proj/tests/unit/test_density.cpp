#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/special_functions/gamma.hpp>

#include "nvmix/density.hpp"
#include "nvmix/error.hpp"
#include "nvmix/special.hpp"
#include "oracles.hpp"

using namespace nvmix;

namespace {

const double kLogTwoPi = std::log(2.0 * M_PI);

// Roots of log h(w) = level on either side of the peak, found in the test by
// plain bisection on w.
double level_root(const DensityIntegrandParams& p, double level, bool left) {
  double lo = left ? 1e-300 : p.peak_w();
  double hi = left ? p.peak_w() : 1e300;
  for (int i = 0; i < 3000; ++i) {
    const double mid = std::sqrt(lo * hi);
    const bool under = log_h(mid, p) < level;
    if (left == under) lo = mid;
    else hi = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace

TEST_CASE("log h examples") {
  const DensityIntegrandParams p = DensityIntegrandParams::density(0.0, 3, 0.0);
  CHECK(log_h(1.0, p) == doctest::Approx(-1.5 * kLogTwoPi).epsilon(1e-15));
  const DensityIntegrandParams q = DensityIntegrandParams::density(2.0, 2, 0.0);
  CHECK(log_h(1.0, q) == doctest::Approx(std::log(std::exp(-1.0) / (2 * M_PI))).epsilon(1e-14));
  CHECK(log_h(0.0, q) == -kInf);
  CHECK_THROWS_AS(log_h(0.0, p), DomainError);
  double prev = kInf;
  for (double d2 = 1.0; d2 < 1e4; d2 *= 3) {
    const double v = log_h(2.0, DensityIntegrandParams::density(d2, 2, 0.0));
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("peak of the integrand") {
  const DensityIntegrandParams q = DensityIntegrandParams::density(2.0, 2, 0.0);
  CHECK(q.log_h_max() == doctest::Approx(-1.0 - kLogTwoPi).epsilon(1e-14));
  for (double nu : {1.0, 4.0}) {
    const MixtureSpec mix = MixtureSpec::inverse_gamma(nu);
    for (double d2 : {0.5, 10.0, 800.0}) {
      const DensityIntegrandParams p = DensityIntegrandParams::density(d2, 5, 0.3);
      QuantileCache cache(mix);
      const Peak peak = find_peak(p, cache, 1e-9);
      CHECK(peak.at == Boundary::none);
      // F_W(w) = Q(nu/2, nu/(2w)) at w = D2/d.
      const double u_star = boost::math::gamma_q(nu / 2, nu / (2 * d2 / 5));
      CHECK(peak.knot.u.p == doctest::Approx(u_star).epsilon(1e-6));
      CHECK(peak.log_h_max == doctest::Approx(log_h(peak.knot.w, p)).epsilon(1e-9));
    }
  }
}

TEST_CASE("peak height does not depend on the mixture") {
  const DensityIntegrandParams p = DensityIntegrandParams::density(7.0, 4, 0.5);
  for (const MixtureSpec& mix : {MixtureSpec::inverse_gamma(2.0), MixtureSpec::pareto(0.5)}) {
    double best = -kInf;
    for (int i = 0; i <= 100000; ++i) {
      const double z = -30.0 + 60.0 * i / 100000.0;
      best = std::max(best, log_h(Prob::from_logit(z), p, mix));
    }
    CHECK(best == doctest::Approx(p.log_h_max()).epsilon(1e-6));
  }
}

TEST_CASE("integrand is unimodal in u") {
  const DensityIntegrandParams p = DensityIntegrandParams::density(12.0, 3, 0.0);
  for (const char* text : {"inverse.gamma:3", "pareto:2", "inverse.burr:2.15,3.61"}) {
    const MixtureSpec mix = MixtureSpec::parse(text);
    bool descending = false;
    double prev = -kInf;
    bool ok = true;
    for (int i = 1; i < 10000; ++i) {
      const double v = log_h(Prob::from_p(i / 10000.0), p, mix);
      if (v < prev - 1e-12) descending = true;
      if (descending && v > prev + 1e-12) ok = false;
      prev = v;
    }
    CHECK(ok);
  }
}

TEST_CASE("peak on the boundary for a bounded mixture") {
  // Pareto W >= 1 with D2/d < 1: h decreases over the whole support.
  const DensityIntegrandParams p = DensityIntegrandParams::density(0.5, 2, 0.0);
  const MixtureSpec mix = MixtureSpec::pareto(3.0);
  QuantileCache cache(mix);
  const Peak peak = find_peak(p, cache, 1e-6);
  CHECK(peak.at == Boundary::lower);
  CHECK(peak.log_h_max == doctest::Approx(log_h(1.0, p)).epsilon(1e-12));
  const Region r = region_bounds(p, cache, peak, 10.0, 1e-6);
  CHECK_FALSE(r.lower);
  REQUIRE(r.upper);
}

TEST_CASE("region bounds of a symmetric toy integrand") {
  // Quantile constructed so that log h(u) = log h_max - 40 (u - 1/2)^2.
  const DensityIntegrandParams p = DensityIntegrandParams::density(6.0, 3, 0.0);
  const double top = p.log_h_max();
  const MixtureSpec toy = MixtureSpec::blackbox(
      [p, top](double u, std::span<const double>) {
        if (u == 0.5) return p.peak_w();
        return level_root(p, top - 40.0 * (u - 0.5) * (u - 0.5), u < 0.5);
      },
      {}, "toy");
  const double eps = 1e-6;
  QuantileCache cache(toy);
  for (int i = 1; i < 64; ++i) cache.eval(Prob{i / 64.0, 1 - i / 64.0}.logit());
  const Peak peak = find_peak(p, cache, eps);
  CHECK(peak.knot.u.p == doctest::Approx(0.5).epsilon(1e-6));
  const Region r = region_bounds(p, cache, peak, 2.0, eps);
  REQUIRE(r.lower);
  REQUIRE(r.upper);
  // Symmetric about 1/2 in u, hence about 0 in logit.
  CHECK(std::abs(r.lower->z + r.upper->z) <= 2 * eps);
  const double half = std::sqrt(2.0 * std::log(10.0) / 40.0);
  CHECK(r.upper->u.p == doctest::Approx(0.5 + half).epsilon(1e-5));
}

TEST_CASE("region bounds sit at the threshold and widen with k_th") {
  const MixtureSpec mix = MixtureSpec::inverse_gamma(2.5);
  const DensityIntegrandParams p = DensityIntegrandParams::density(40.0, 6, 0.0);
  double prev_lo = kInf, prev_hi = -kInf;
  for (double k : {2.0, 5.0, 10.0, 20.0, 40.0}) {
    QuantileCache cache(mix);
    const Peak peak = find_peak(p, cache, 1e-6);
    const Region r = region_bounds(p, cache, peak, k, 1e-6);
    REQUIRE(r.lower);
    REQUIRE(r.upper);
    CHECK(log_h(r.lower->w, p) <= r.log_threshold);
    CHECK(log_h(r.upper->w, p) <= r.log_threshold);
    CHECK(log_h(mix.quantile(Prob::from_logit(r.lower->z + 2e-6)), p) > r.log_threshold);
    CHECK(log_h(mix.quantile(Prob::from_logit(r.upper->z - 2e-6)), p) > r.log_threshold);
    CHECK(r.lower->z < prev_lo);
    CHECK(r.upper->z > prev_hi);
    prev_lo = r.lower->z;
    prev_hi = r.upper->z;
  }
}

TEST_CASE("closed-form densities") {
  const NvmModel cauchy(Eigen::MatrixXd::Identity(1, 1), MixtureSpec::inverse_gamma(1.0));
  CHECK(closed_log_density(cauchy, Eigen::VectorXd::Zero(1)) ==
        doctest::Approx(-std::log(M_PI)).epsilon(1e-14));
  const NvmModel normal(Eigen::MatrixXd::Identity(2, 2), MixtureSpec::constant(1.0));
  CHECK(closed_log_density(normal, Eigen::VectorXd::Zero(2)) ==
        doctest::Approx(-kLogTwoPi).epsilon(1e-14));
  for (double d2 : {0.0, 1.0, 30.0, 400.0, 5000.0}) {
    CHECK(closed_log_density(MixtureSpec::pareto(6.0), d2, 10, 0.2) ==
          doctest::Approx(oracle::pareto_mix_log_density(d2, 10, 0.2, 6.0)).epsilon(1e-9));
  }
  std::mt19937 rng(1);
  std::normal_distribution<double> n;
  Eigen::MatrixXd b(4, 4);
  for (int i = 0; i < 16; ++i) b(i / 4, i % 4) = n(rng);
  const Eigen::MatrixXd s = b * b.transpose() + Eigen::MatrixXd::Identity(4, 4);
  const Eigen::VectorXd mu = Eigen::VectorXd::LinSpaced(4, -1, 1);
  const NvmModel t(mu, s, MixtureSpec::inverse_gamma(3.3));
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 0.7);
  CHECK(closed_log_density(t, x) ==
        doctest::Approx(oracle::mvt_log_density(x, mu, s, 3.3)).epsilon(1e-12));
  const NvmModel burr(s, MixtureSpec::inverse_burr(2, 2));
  CHECK_THROWS_AS(closed_log_density(burr, x), UnsupportedError);
}

TEST_CASE("adaptive estimates match the multivariate t density") {
  const int d = 10;
  const NvmModel model(Eigen::MatrixXd::Identity(d, d), MixtureSpec::inverse_gamma(4.0));
  Eigen::MatrixXd X(6, d);
  X.setZero();
  for (int i = 1; i < 6; ++i) X.row(i).setConstant(std::pow(4.0, i - 1));
  const auto r = log_density_batch(X, model, {}, 3);
  // x = 0: log Gamma(7) - log Gamma(2) - 5 log(4 pi).
  CHECK(std::abs(r[0].estimate - (std::lgamma(7.0) - 5 * std::log(4 * M_PI))) <= 1e-3);
  for (int i = 0; i < 6; ++i) {
    const double ref = oracle::mvt_log_density(X.row(i).transpose(), Eigen::VectorXd::Zero(d),
                                               Eigen::MatrixXd::Identity(d, d), 4.0);
    CHECK(std::abs(r[i].estimate - ref) <= 1e-3);
    CHECK(r[i].converged);
  }
  CHECK(r[5].estimate < -60.0);
}

TEST_CASE("adaptive estimates match the Pareto mixture density") {
  const int d = 10;
  const NvmModel model(Eigen::MatrixXd::Identity(d, d), MixtureSpec::pareto(6.0));
  Eigen::MatrixXd X(5, d);
  for (int i = 0; i < 5; ++i) X.row(i).setConstant(0.3 * std::pow(5.0, i));
  const auto r = log_density_batch(X, model, {}, 8);
  for (int i = 0; i < 5; ++i) {
    const double d2 = X.row(i).squaredNorm();
    CHECK(std::abs(r[i].estimate - closed_log_density(MixtureSpec::pareto(6.0), d2, d, 0.0)) <=
          1e-3);
  }
}

TEST_CASE("adaptive phase corrects the biased first pass") {
  const int d = 10;
  const MixtureSpec mix = MixtureSpec::inverse_gamma(4.0);
  const DensityIntegrandParams p = DensityIntegrandParams::density(1e5, d, 0.0);
  RqmcConfig pilot;
  pilot.i_max = 3;
  const RqmcResult crude = rqmc_log_estimate(
      [&](std::span<const double> v) { return log_h(Prob::from_p(v[0]), p, mix); }, 1, pilot, 5);
  const auto r = log_integral_batch(std::span(&p, 1), mix, {}, 5);
  const double ref = closed_log_density(mix, 1e5, d, 0.0);
  CHECK(std::abs(r[0].estimate - ref) <= 1e-3);
  CHECK(std::abs(crude.estimate - ref) > 0.1);
}

TEST_CASE("constant mixture is exact") {
  const NvmModel model(Eigen::MatrixXd::Identity(3, 3), MixtureSpec::constant(1.0));
  Eigen::MatrixXd X(2, 3);
  X << 0, 0, 0, 1, 2, 3;
  const auto r = log_density_batch(X, model, {}, 1);
  CHECK(r[0].estimate == doctest::Approx(-1.5 * kLogTwoPi).epsilon(1e-15));
  CHECK(r[1].estimate == doctest::Approx(-1.5 * kLogTwoPi - 7.0).epsilon(1e-15));
  CHECK(r[1].error == 0.0);
}

TEST_CASE("inverse-Burr density integrates to its distribution") {
  // 1-D: density estimates integrate to the probability of an interval.
  const NvmModel model(Eigen::MatrixXd::Identity(1, 1), MixtureSpec::inverse_burr(2.15, 3.61));
  const int n = 201;
  Eigen::MatrixXd X(n, 1);
  for (int i = 0; i < n; ++i) X(i, 0) = -2.0 + 4.0 * i / (n - 1);
  DensityConfig cfg;
  cfg.rqmc.tol = 1e-5;
  const auto r = log_density_batch(X, model, cfg, 2);
  double integral = 0.0;
  for (int i = 0; i + 1 < n; ++i)
    integral += 0.5 * (std::exp(r[i].estimate) + std::exp(r[i + 1].estimate)) * 0.02;
  // P(-2 < X <= 2) = 2 E[Phi(2 / sqrt(W))] - 1 by 1-D quadrature over u.
  const MixtureSpec& mix = model.mixture();
  const double ref = oracle::integrate(
      [&](double u) { return 2.0 * norm_cdf(2.0 / std::sqrt(mix.quantile(u))) - 1.0; }, 0.0, 1.0,
      1e-12);
  CHECK(integral == doctest::Approx(ref).epsilon(2e-4));
}

TEST_CASE("bad inputs") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Ones(2, 2);
  const NvmModel sing(s, MixtureSpec::inverse_gamma(2));
  CHECK_THROWS_AS(log_density_batch(Eigen::MatrixXd::Zero(1, 2), sing, {}, 1), DomainError);
  const NvmModel ok(Eigen::MatrixXd::Identity(2, 2), MixtureSpec::inverse_gamma(2));
  CHECK_THROWS_AS(log_density_batch(Eigen::MatrixXd::Zero(1, 3), ok, {}, 1), DomainError);
}
