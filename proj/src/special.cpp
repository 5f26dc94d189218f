#include "nvmix/special.hpp"

#include <algorithm>

#include <boost/math/special_functions/gamma.hpp>

namespace nvmix {

namespace {

namespace bm = boost::math;
using Policy = bm::policies::policy<bm::policies::promote_double<false>,
                                    bm::policies::overflow_error<bm::policies::ignore_error>,
                                    bm::policies::underflow_error<bm::policies::ignore_error>,
                                    bm::policies::evaluation_error<bm::policies::ignore_error>>;

double poly(const double* c, int n, double x) {
  double r = c[n - 1];
  for (int i = n - 2; i >= 0; --i) r = r * x + c[i];
  return r;
}

}  // namespace

double norm_quantile(double p) {
  if (std::isnan(p) || p < 0.0 || p > 1.0) return kNaN;
  if (p == 0.0) return -kInf;
  if (p == 1.0) return kInf;

  static const double a[8] = {3.3871328727963666080e0, 1.3314166789178437745e2,
                              1.9715909503065514427e3, 1.3731693765509461125e4,
                              4.5921953931549871457e4, 6.7265770927008700853e4,
                              3.3430575583588128105e4, 2.5090809287301226727e3};
  static const double b[8] = {1.0, 4.2313330701600911252e1,
                              6.8718700749205790830e2, 5.3941960214247511077e3,
                              2.1213794301586595867e4, 3.9307895800092710610e4,
                              2.8729085735721942674e4, 5.2264952788528545610e3};
  static const double c[8] = {1.42343711074968357734e0, 4.63033784615654529590e0,
                              5.76949722146069140550e0, 3.64784832476320460504e0,
                              1.27045825245236838258e0, 2.41780725177450611770e-1,
                              2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static const double d[8] = {1.0, 2.05319162663775882187e0,
                              1.67638483018380384940e0, 6.89767334985100004550e-1,
                              1.48103976427480074590e-1, 1.51986665636164571966e-2,
                              5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static const double e[8] = {6.65790464350110377720e0, 5.46378491116411436990e0,
                              1.78482653991729133580e0, 2.96560571828504891230e-1,
                              2.65321895265761230930e-2, 1.24266094738807843860e-3,
                              2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static const double f[8] = {1.0, 5.99832206555887937690e-1,
                              1.36929880922735805310e-1, 1.48753612908506148525e-2,
                              7.86869131145613259100e-4, 1.84631831751005468180e-5,
                              1.42151175831644588870e-7, 2.04426310338993978564e-15};

  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * poly(a, 8, r) / poly(b, 8, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = poly(c, 8, r) / poly(d, 8, r);
  } else {
    r -= 5.0;
    x = poly(e, 8, r) / poly(f, 8, r);
  }
  return q < 0.0 ? -x : x;
}

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -kInf;
  const double m = *std::max_element(x.begin(), x.end());
  if (m == -kInf) return -kInf;
  if (m == kInf) return kInf;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

double log_mean_exp(std::span<const double> x) {
  if (x.empty()) return -kInf;
  const double m = *std::max_element(x.begin(), x.end());
  if (m == -kInf || m == kInf) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s / static_cast<double>(x.size()));
}

double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (x == kInf) return 1.0;
  return bm::gamma_p(a, x, Policy());
}

double gamma_q(double a, double x) {
  if (x <= 0.0) return 1.0;
  if (x == kInf) return 0.0;
  return bm::gamma_q(a, x, Policy());
}

double gamma_p_inv(double a, double p) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return kInf;
  return bm::gamma_p_inv(a, p, Policy());
}

double gamma_q_inv(double a, double q) {
  if (q >= 1.0) return 0.0;
  if (q <= 0.0) return kInf;
  return bm::gamma_q_inv(a, q, Policy());
}

double log_gamma(double a) { return bm::lgamma(a, Policy()); }

double log_scaled_lower_gamma(double a, double x) {
  if (x <= 0.0) return -std::log(a);
  if (x < a + 1.0) {
    // x^{-a} gamma(a,x) = e^{-x} sum_n x^n / (a (a+1) ... (a+n))
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 1000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return -x + std::log(sum);
  }
  return log_gamma(a) + std::log(gamma_p(a, x)) - a * std::log(x);
}

}  // namespace nvmix
