#include "nvmix/mixture.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "nvmix/error.hpp"
#include "nvmix/special.hpp"

namespace nvmix {

Prob Prob::from_logit(double z) {
  if (z <= 0.0) {
    const double e = std::exp(z);
    return {e / (1.0 + e), 1.0 / (1.0 + e)};
  }
  const double e = std::exp(-z);
  return {1.0 / (1.0 + e), e / (1.0 + e)};
}

double Prob::logit() const { return std::log(p) - std::log(q); }

MixtureSpec::MixtureSpec(MixtureKind kind, std::vector<double> params, std::string name)
    : kind_(kind), params_(std::move(params)), name_(std::move(name)) {
  switch (kind_) {
    case MixtureKind::constant:
    case MixtureKind::pareto:
      support_ = SupportHint::bounded;
      break;
    case MixtureKind::inverse_gamma:
    case MixtureKind::inverse_burr:
      support_ = SupportHint::unbounded;
      break;
    case MixtureKind::blackbox:
      support_ = SupportHint::unknown;
      break;
  }
}

MixtureSpec MixtureSpec::constant(double c) {
  MixtureSpec m(MixtureKind::constant, {c}, "constant");
  m.validate();
  return m;
}

MixtureSpec MixtureSpec::inverse_gamma(double nu) {
  MixtureSpec m(MixtureKind::inverse_gamma, {nu}, "inverse.gamma");
  m.validate();
  return m;
}

MixtureSpec MixtureSpec::pareto(double alpha) {
  MixtureSpec m(MixtureKind::pareto, {alpha}, "pareto");
  m.validate();
  return m;
}

MixtureSpec MixtureSpec::inverse_burr(double nu1, double nu2) {
  MixtureSpec m(MixtureKind::inverse_burr, {nu1, nu2}, "inverse.burr");
  m.validate();
  return m;
}

MixtureSpec MixtureSpec::blackbox(QuantileFn q, std::vector<double> nu, std::string name,
                                  SupportHint support) {
  if (!q) throw DomainError("blackbox mixture needs a quantile function");
  MixtureSpec m(MixtureKind::blackbox, std::move(nu), std::move(name));
  m.user_ = std::move(q);
  m.support_ = support;
  return m;
}

bool MixtureSpec::valid_params(std::span<const double> nu) const {
  auto pos = [](double x) { return std::isfinite(x) && x > 0.0; };
  switch (kind_) {
    case MixtureKind::constant:
    case MixtureKind::inverse_gamma:
    case MixtureKind::pareto:
      return nu.size() == 1 && pos(nu[0]);
    case MixtureKind::inverse_burr:
      return nu.size() == 2 && pos(nu[0]) && pos(nu[1]);
    case MixtureKind::blackbox:
      return nu.size() == params_.size();
  }
  return false;
}

void MixtureSpec::validate() const {
  if (!valid_params(params_)) {
    std::ostringstream msg;
    msg << "invalid parameters for mixture " << name_ << ":";
    for (double x : params_) msg << ' ' << x;
    throw DomainError(msg.str());
  }
}

std::size_t MixtureSpec::num_free_params() const {
  return kind_ == MixtureKind::constant ? 0 : params_.size();
}

MixtureSpec MixtureSpec::with_params(std::span<const double> nu) const {
  MixtureSpec m = *this;
  // Parameters beyond the free ones (the value of a constant W) are kept.
  if (nu.size() == num_free_params() && nu.size() < params_.size())
    std::copy(nu.begin(), nu.end(), m.params_.begin());
  else
    m.params_.assign(nu.begin(), nu.end());
  m.validate();
  return m;
}

SupportHint MixtureSpec::support() const { return support_; }

std::string MixtureSpec::to_string() const {
  std::ostringstream out;
  out.precision(17);
  out << name_;
  for (std::size_t i = 0; i < params_.size(); ++i) out << (i ? "," : ":") << params_[i];
  return out.str();
}

MixtureSpec MixtureSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string family(text.substr(0, colon));
  std::vector<double> values;
  if (colon != std::string_view::npos) {
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      std::string_view tok = rest.substr(0, comma);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw DomainError("cannot parse mixture parameter '" + std::string(tok) + "' in '" +
                          std::string(text) + "'");
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  auto want = [&](std::size_t k, std::vector<double> defaults) {
    if (values.empty()) values = std::move(defaults);
    if (values.size() != k)
      throw DomainError("mixture '" + family + "' takes " + std::to_string(k) + " parameter(s)");
  };
  if (family == "constant") {
    want(1, {1.0});
    return constant(values[0]);
  }
  if (family == "inverse.gamma") {
    want(1, {5.0});
    return inverse_gamma(values[0]);
  }
  if (family == "pareto") {
    want(1, {2.0});
    return pareto(values[0]);
  }
  if (family == "inverse.burr") {
    want(2, {2.0, 2.0});
    return inverse_burr(values[0], values[1]);
  }
  throw DomainError("unknown mixture family '" + family + "'");
}

double MixtureSpec::quantile(double u) const { return quantile(Prob::from_p(u), params_); }

double MixtureSpec::quantile(Prob u) const { return quantile(u, params_); }

double MixtureSpec::quantile(Prob u, std::span<const double> nu) const {
  if (!(u.p > 0.0 && u.p < 1.0) && !(u.q > 0.0 && u.q < 1.0))
    throw DomainError("quantile argument outside (0,1)");
  const bool upper = u.p > 0.5;
  switch (kind_) {
    case MixtureKind::constant:
      return nu[0];
    case MixtureKind::inverse_gamma: {
      // W = nu / (2 G) with G ~ Gamma(nu/2, 1); F_W(w) = Q(nu/2, nu/(2w)).
      const double a = 0.5 * nu[0];
      const double g = upper ? gamma_p_inv(a, u.q) : gamma_q_inv(a, u.p);
      return nu[0] / (2.0 * g);
    }
    case MixtureKind::pareto:
      return std::exp(-std::log(u.q) / nu[0]);
    case MixtureKind::inverse_burr: {
      const double log_u = upper ? std::log1p(-u.q) : std::log(u.p);
      const double base = std::expm1(-log_u / nu[1]);
      return std::exp(-std::log(base) / nu[0]);
    }
    case MixtureKind::blackbox: {
      const double w = user_(u.p, nu);
      if (!(w >= 0.0) || !std::isfinite(w)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "quantile function of mixture '" << name_ << "' returned " << w << " at u = " << u.p;
        throw InvalidMixtureError(msg.str());
      }
      return w;
    }
  }
  return kNaN;
}

double mean_sqrt_w(const MixtureSpec& mix, std::size_t n) {
  if (mix.kind() == MixtureKind::constant) return std::sqrt(mix.params()[0]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    s += std::sqrt(mix.quantile(Prob::from_p(u)));
  }
  return s / static_cast<double>(n);
}

}  // namespace nvmix
