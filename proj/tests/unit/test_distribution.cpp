#include <doctest.h>

#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "nvmix/distribution.hpp"
#include "nvmix/error.hpp"
#include "nvmix/special.hpp"
#include "oracles.hpp"

using namespace nvmix;

namespace {

Eigen::MatrixXd correlation(double rho, int d) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(d, d, rho);
  s.diagonal().setOnes();
  return s;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(v.size());
  int i = 0;
  for (double e : v) x(i++) = e;
  return x;
}

}  // namespace

TEST_CASE("reordering puts the tightest variable first") {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd a = vec({-kInf, -kInf});
  CHECK(reorder(a, vec({0.1, 5.0}), id, 1.0).perm == std::vector<int>{0, 1});
  CHECK(reorder(a, vec({5.0, 0.1}), id, 1.0).perm == std::vector<int>{1, 0});
}

TEST_CASE("reordered factor matches the permuted scale matrix") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  Eigen::MatrixXd b = Eigen::MatrixXd::Random(6, 6);
  const Eigen::MatrixXd s = b * b.transpose() + Eigen::MatrixXd::Identity(6, 6);
  Eigen::VectorXd up(6);
  for (int i = 0; i < 6; ++i) up(i) = u(rng);
  const OrderedProblem p = reorder(Eigen::VectorXd::Constant(6, -kInf), up, s, 1.0);
  Eigen::MatrixXd sp(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) sp(i, j) = s(p.perm[i], p.perm[j]);
  CHECK((p.factor * p.factor.transpose() - sp).cwiseAbs().maxCoeff() < 1e-12);
  for (int i = 0; i < 6; ++i) CHECK(p.upper(i) == up(p.perm[i]));
  CHECK(p.clamped_pivots == 0);
}

TEST_CASE("integrand is exact for independent normal coordinates") {
  const Eigen::VectorXd a = vec({-1.0, -kInf, 0.5});
  const Eigen::VectorXd b = vec({1.0, 0.3, kInf});
  const OrderedProblem p = natural_order(a, b, Eigen::MatrixXd::Identity(3, 3));
  const double exact = (norm_cdf(1) - norm_cdf(-1)) * norm_cdf(0.3) * norm_cdf(-0.5);
  const std::vector<double> u{0.3, 0.9, 0.1};
  CHECK(integrand_g(u, p, MixtureSpec::constant(1.0)) == doctest::Approx(exact).epsilon(1e-14));
}

TEST_CASE("quadrant probability of an uncorrelated normal") {
  const NvmModel m(Eigen::MatrixXd::Identity(2, 2), MixtureSpec::constant(1.0));
  const RqmcResult r = prob(vec({-kInf, -kInf}), vec({0.0, 0.0}), m, {}, 1);
  CHECK(std::abs(r.estimate - 0.25) <= 1e-3);
  CHECK(r.converged);
}

TEST_CASE("whole space and empty boxes") {
  const NvmModel m(correlation(0.3, 3), MixtureSpec::inverse_gamma(2));
  const Eigen::VectorXd inf = Eigen::VectorXd::Constant(3, kInf);
  const RqmcResult all = prob(-inf, inf, m, {}, 1);
  CHECK(all.estimate == 1.0);
  CHECK(all.error == 0.0);
  CHECK(prob(vec({0, 0, 0}), vec({0, 1, 1}), m, {}, 1).estimate == 0.0);
  CHECK_THROWS_AS(prob(vec({1, 0, 0}), vec({0, 1, 1}), m, {}, 1), DomainError);
  CHECK_THROWS_AS(prob(vec({0, 0}), vec({1, 1}), m, {}, 1), DomainError);
}

TEST_CASE("univariate t distribution function") {
  const boost::math::students_t t(3.0);
  const NvmModel m(Eigen::MatrixXd::Identity(1, 1), MixtureSpec::inverse_gamma(3.0));
  for (double x : {-4.0, -0.5, 0.0, 1.7}) {
    const RqmcResult r = prob(vec({-kInf}), vec({x}), m, {}, 2);
    CHECK(std::abs(r.estimate - boost::math::cdf(t, x)) <= 1e-3);
  }
}

TEST_CASE("normal probabilities agree with adaptive quadrature") {
  std::mt19937 rng(123);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const Eigen::MatrixXd s = correlation(0.6, 3);
  const NvmModel m(s, MixtureSpec::constant(1.0));
  for (int k = 0; k < 5; ++k) {
    Eigen::VectorXd a(3), b(3);
    for (int i = 0; i < 3; ++i) {
      const double x = u(rng), y = u(rng);
      a(i) = std::min(x, y);
      b(i) = std::max(x, y);
    }
    const double ref = oracle::mvn_cdf(a, b, s);
    CHECK(std::abs(prob(a, b, m, {}, 10 + k).estimate - ref) <= 2e-3);
  }
}

TEST_CASE("ordering and antithetic variates do not change the answer") {
  const Eigen::MatrixXd s = correlation(0.4, 5);
  const NvmModel m(s, MixtureSpec::inverse_gamma(3.0));
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(5, -kInf);
  const Eigen::VectorXd b = vec({0.5, 2.0, -0.3, 1.0, 3.0});
  ProbOptions plain;
  plain.reorder = false;
  plain.antithetic = false;
  const RqmcResult r1 = prob(a, b, m, {}, 1);
  const RqmcResult r2 = prob(a, b, m, {}, 2, plain);
  CHECK(std::abs(r1.estimate - r2.estimate) <= 2e-3);
}

TEST_CASE("probabilities are monotone in the upper limit") {
  const NvmModel m(correlation(0.5, 3), MixtureSpec::pareto(2.0));
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(3, -kInf);
  double prev = 0.0;
  for (double b = -2.0; b <= 2.0; b += 0.5) {
    RqmcConfig cfg;
    cfg.tol = 1e-4;
    const double p = prob(a, Eigen::VectorXd::Constant(3, b), m, cfg, 5).estimate;
    CHECK(p >= prev - 2e-4);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    prev = p;
  }
}

TEST_CASE("rank-one scale matrix") {
  const NvmModel m(Eigen::MatrixXd::Ones(2, 2), MixtureSpec::constant(1.0));
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(2, -kInf);
  const RqmcResult r = prob_singular(a, vec({0.0, 0.0}), m, {}, 1);
  CHECK(std::abs(r.estimate - 0.5) <= 1e-3);
  const RqmcResult s = prob(a, vec({0.0, -1.0}), m, {}, 1);
  CHECK(std::abs(s.estimate - norm_cdf(-1.0)) <= 1e-3);
}

TEST_CASE("singular probability equals the reduced full-rank probability") {
  Eigen::MatrixXd s(3, 3);
  s << 1.0, 1.0, 0.3, 1.0, 1.0, 0.3, 0.3, 0.3, 1.0;
  const NvmModel sing(s, MixtureSpec::inverse_gamma(4.0));
  Eigen::MatrixXd r(2, 2);
  r << 1.0, 0.3, 0.3, 1.0;
  const NvmModel full(r, MixtureSpec::inverse_gamma(4.0));
  const RqmcResult p = prob(vec({-kInf, -1.0, -kInf}), vec({0.8, 0.5, 0.2}), sing, {}, 3);
  const RqmcResult q = prob(vec({-1.0, -kInf}), vec({0.5, 0.2}), full, {}, 4);
  CHECK(std::abs(p.estimate - q.estimate) <= 2e-3);
  // Negatively related rows swap their limits.
  Eigen::MatrixXd n(2, 2);
  n << 1.0, -1.0, -1.0, 1.0;
  const NvmModel neg(n, MixtureSpec::constant(1.0));
  // X2 = -X1: P(X1 <= 1, -X1 <= 0.5) = Phi(1) - Phi(-0.5).
  const RqmcResult z = prob(vec({-kInf, -kInf}), vec({1.0, 0.5}), neg, {}, 5);
  CHECK(std::abs(z.estimate - (norm_cdf(1.0) - norm_cdf(-0.5))) <= 1e-3);
}

TEST_CASE("deterministic coordinates") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 2);
  s(0, 0) = 1.0;
  const NvmModel m(vec({0.0, 2.0}), s, MixtureSpec::constant(1.0));
  const RqmcResult out = prob(vec({-kInf, -kInf}), vec({0.0, 1.0}), m, {}, 1);
  CHECK(out.estimate == 0.0);
  CHECK(out.error == 0.0);
  const RqmcResult in = prob(vec({-kInf, 1.0}), vec({0.0, 3.0}), m, {}, 1);
  CHECK(std::abs(in.estimate - 0.5) <= 1e-3);
}
