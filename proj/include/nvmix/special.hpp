#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace nvmix {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Standard normal distribution function, accurate in both tails.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x - 0.5 * kLog2Pi);
}

inline double log_norm_pdf(double x) { return -0.5 * x * x - 0.5 * kLog2Pi; }

// Phi(b) - Phi(a), computed on the side of the axis that avoids cancellation.
inline double norm_interval(double a, double b) {
  if (a > 0.0) return norm_cdf(-a) - norm_cdf(-b);
  return norm_cdf(b) - norm_cdf(a);
}

// Inverse of the standard normal distribution function (Wichura, AS241).
double norm_quantile(double p);

// log(exp(a) + exp(b)) and the vector form; -inf inputs are neutral.
double log_add_exp(double a, double b);
double log_sum_exp(std::span<const double> x);
// log(mean(exp(x))).
double log_mean_exp(std::span<const double> x);

// Regularized lower incomplete gamma P(a, x) and its inverses.
double gamma_p(double a, double x);
double gamma_q(double a, double x);
double gamma_p_inv(double a, double p);
double gamma_q_inv(double a, double q);
double log_gamma(double a);

// log(x^{-a} * gamma(a, x)) with gamma the unregularized lower incomplete
// gamma function; finite at x = 0 where it equals -log(a).
double log_scaled_lower_gamma(double a, double x);

}  // namespace nvmix
