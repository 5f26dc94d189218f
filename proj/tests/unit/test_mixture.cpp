#include <doctest.h>

#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "nvmix/error.hpp"
#include "nvmix/mixture.hpp"

using namespace nvmix;

TEST_CASE("parsing mixture descriptions") {
  const MixtureSpec ig = MixtureSpec::parse("inverse.gamma:2.5");
  CHECK(ig.kind() == MixtureKind::inverse_gamma);
  CHECK(ig.params() == std::vector<double>{2.5});
  const MixtureSpec burr = MixtureSpec::parse("inverse.burr:2.15,3.61");
  CHECK(burr.kind() == MixtureKind::inverse_burr);
  CHECK(burr.params() == std::vector<double>{2.15, 3.61});
  CHECK(MixtureSpec::parse("pareto:1.6").params()[0] == 1.6);
  CHECK(MixtureSpec::parse("constant:1").num_free_params() == 0);
  CHECK(MixtureSpec::parse("inverse.burr").params() == std::vector<double>{2.0, 2.0});
  CHECK(MixtureSpec::parse(burr.to_string()).params() == burr.params());
  CHECK_THROWS_AS(MixtureSpec::parse("gamma:1"), DomainError);
  CHECK_THROWS_AS(MixtureSpec::parse("inverse.gamma:-1"), DomainError);
  CHECK_THROWS_AS(MixtureSpec::parse("inverse.gamma:abc"), DomainError);
  CHECK_THROWS_AS(MixtureSpec::parse("inverse.burr:1"), DomainError);
}

TEST_CASE("inverse-gamma quantile") {
  CHECK(MixtureSpec::inverse_gamma(2.0).quantile(0.5) ==
        doctest::Approx(1.0 / std::log(2.0)).epsilon(1e-14));
  // F_W(w) = Q(nu/2, nu/(2w)).
  for (double nu : {0.5, 2.5, 10.0}) {
    const MixtureSpec m = MixtureSpec::inverse_gamma(nu);
    for (double u : {1e-10, 0.01, 0.3, 0.8, 0.999}) {
      const double w = m.quantile(u);
      CHECK(boost::math::gamma_q(nu / 2, nu / (2 * w)) == doctest::Approx(u).epsilon(1e-10));
    }
  }
}

TEST_CASE("quantiles stay resolved when 1 - u is below double rounding") {
  const MixtureSpec p = MixtureSpec::pareto(6.0);
  CHECK(p.quantile(Prob::from_q(1e-24)) == doctest::Approx(1e4).epsilon(1e-12));
  const MixtureSpec ig = MixtureSpec::inverse_gamma(4.0);
  const double w1 = ig.quantile(Prob::from_q(1e-30));
  const double w2 = ig.quantile(Prob::from_q(1e-20));
  CHECK(std::isfinite(w1));
  CHECK(w1 > w2);
  // P(W > w) = P(nu/(2w) gamma lower tail).
  CHECK(boost::math::gamma_p(2.0, 2.0 / w1) == doctest::Approx(1e-30).epsilon(1e-9));
  const MixtureSpec b = MixtureSpec::inverse_burr(2.0, 3.0);
  const double q = 1e-25;
  // u^{-1/nu2} - 1 ~ q / nu2 for tiny q.
  CHECK(b.quantile(Prob::from_q(q)) == doctest::Approx(std::pow(q / 3.0, -0.5)).epsilon(1e-9));
}

TEST_CASE("inverse-Burr and Pareto closed forms") {
  const MixtureSpec b = MixtureSpec::inverse_burr(2.15, 3.61);
  for (double u : {0.05, 0.5, 0.9}) {
    CHECK(b.quantile(u) ==
          doctest::Approx(std::pow(std::pow(u, -1 / 3.61) - 1, -1 / 2.15)).epsilon(1e-13));
  }
  CHECK(MixtureSpec::pareto(2.0).quantile(0.75) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(MixtureSpec::constant(3.0).quantile(0.2) == 3.0);
}

TEST_CASE("quantiles are non-decreasing") {
  for (const char* text : {"inverse.gamma:1.3", "pareto:0.8", "inverse.burr:0.9,4"}) {
    const MixtureSpec m = MixtureSpec::parse(text);
    double prev = 0.0;
    for (double z = -30; z <= 30; z += 0.25) {
      const double w = m.quantile(Prob::from_logit(z));
      CHECK(w >= prev);
      prev = w;
    }
  }
}

TEST_CASE("blackbox quantile validation") {
  const MixtureSpec bad = MixtureSpec::blackbox(
      [](double u, std::span<const double>) { return u - 0.5; }, {});
  CHECK_NOTHROW(bad.quantile(0.7));
  CHECK_THROWS_AS(bad.quantile(0.2), InvalidMixtureError);
  const MixtureSpec nan = MixtureSpec::blackbox(
      [](double, std::span<const double>) { return NAN; }, {});
  CHECK_THROWS_AS(nan.quantile(0.2), InvalidMixtureError);
  CHECK_THROWS_AS(MixtureSpec::constant(1).quantile(1.5), DomainError);
}

TEST_CASE("E[sqrt(W)]") {
  CHECK(mean_sqrt_w(MixtureSpec::constant(4.0)) == 2.0);
  const double nu = 5.0;
  const double exact = std::sqrt(nu / 2) * std::exp(std::lgamma((nu - 1) / 2) - std::lgamma(nu / 2));
  CHECK(mean_sqrt_w(MixtureSpec::inverse_gamma(nu)) == doctest::Approx(exact).epsilon(1e-2));
}

TEST_CASE("logit round trip") {
  for (double z : {-700.0, -20.0, -1.0, 0.0, 2.5, 36.0, 700.0}) {
    const Prob p = Prob::from_logit(z);
    CHECK(p.logit() == doctest::Approx(z).epsilon(1e-12));
    CHECK(p.p + p.q == doctest::Approx(1.0).epsilon(1e-15));
  }
}
