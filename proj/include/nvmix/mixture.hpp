#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nvmix {

enum class MixtureKind { constant, inverse_gamma, pareto, inverse_burr, blackbox };
enum class SupportHint { unbounded, bounded, unknown };

// A probability p in (0,1) together with its complement 1 - p. Keeping both
// lets quantile functions stay accurate when p is within rounding of 1.
struct Prob {
  double p;
  double q;
  static Prob from_p(double p) { return {p, 1.0 - p}; }
  static Prob from_q(double q) { return {1.0 - q, q}; }
  // From the logit z = log(p / (1 - p)).
  static Prob from_logit(double z);
  double logit() const;
};

// Quantile callback for user mixtures: (u, nu) -> w >= 0.
using QuantileFn = std::function<double(double u, std::span<const double> nu)>;

// Distribution of the mixing variable W, described by its quantile function.
class MixtureSpec {
 public:
  static MixtureSpec constant(double c = 1.0);
  static MixtureSpec inverse_gamma(double nu);
  static MixtureSpec pareto(double alpha);
  static MixtureSpec inverse_burr(double nu1, double nu2);
  static MixtureSpec blackbox(QuantileFn q, std::vector<double> nu, std::string name = "blackbox",
                              SupportHint support = SupportHint::unknown);

  // Parses "constant:1", "inverse.gamma:2.5", "pareto:1.6",
  // "inverse.burr:2.15,3.61". Parameters may be omitted, giving the family
  // defaults (1, 5, 2 and (2, 2)).
  static MixtureSpec parse(std::string_view text);

  MixtureKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  std::string to_string() const;
  const std::vector<double>& params() const { return params_; }
  // Number of parameters an estimator would fit (zero for constant W).
  std::size_t num_free_params() const;
  MixtureSpec with_params(std::span<const double> nu) const;
  SupportHint support() const;
  // True when every parameter is in its valid range.
  bool valid_params(std::span<const double> nu) const;

  double quantile(double u) const;
  double quantile(Prob u) const;
  double quantile(Prob u, std::span<const double> nu) const;

 private:
  MixtureSpec(MixtureKind kind, std::vector<double> params, std::string name);
  void validate() const;

  MixtureKind kind_;
  std::vector<double> params_;
  std::string name_;
  QuantileFn user_;
  SupportHint support_ = SupportHint::unbounded;
};

// E[sqrt(W)] by the midpoint rule on (0,1) with n points (exact for constant W).
double mean_sqrt_w(const MixtureSpec& mix, std::size_t n = 1024);

}  // namespace nvmix
