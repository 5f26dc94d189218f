#include "nvmix/bench.hpp"

#include <cmath>
#include <map>

#include "nvmix/distribution.hpp"
#include "nvmix/error.hpp"
#include "nvmix/model.hpp"
#include "nvmix/rqmc.hpp"

namespace nvmix {

Eigen::MatrixXd wishart_correlation(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  const Eigen::MatrixXd G = Eigen::MatrixXd::NullaryExpr(d, d, [&]() { return z(rng); });
  const Eigen::MatrixXd W = G.transpose() * G;
  const Eigen::VectorXd s = W.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd R = s.asDiagonal() * W * s.asDiagonal();
  R = 0.5 * (R + R.transpose()).eval();
  R.diagonal().setOnes();
  return R;
}

BoxSetting random_box(int d, std::mt19937_64& rng) {
  BoxSetting s;
  std::uniform_real_distribution<double> unif(0.0, 3.0 * std::sqrt(static_cast<double>(d)));
  s.upper = Eigen::VectorXd::NullaryExpr(d, [&]() { return unif(rng); });
  s.lower = Eigen::VectorXd::Constant(d, -std::numeric_limits<double>::infinity());
  s.corr = wishart_correlation(d, rng);
  return s;
}

std::string to_string(BenchMethod m) {
  switch (m) {
    case BenchMethod::mc: return "mc";
    case BenchMethod::mc_reordered: return "mc_reordered";
    case BenchMethod::rqmc: return "rqmc";
    case BenchMethod::rqmc_reordered: return "rqmc_reordered";
  }
  return "?";
}

BenchMethod parse_bench_method(const std::string& s) {
  for (BenchMethod m : {BenchMethod::mc, BenchMethod::mc_reordered, BenchMethod::rqmc,
                        BenchMethod::rqmc_reordered})
    if (to_string(m) == s) return m;
  throw DomainError("unknown benchmark method '" + s + "'");
}

std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

ConvergenceReport bench_convergence(const MixtureSpec& mix, const ConvergenceConfig& cfg,
                                    std::uint64_t seed) {
  ConvergenceReport rep;
  struct Job {
    int dim;
    int setting;
    BoxSetting box;
  };
  std::vector<Job> jobs;
  for (int d : cfg.dims) {
    if (d < 1) throw DomainError("benchmark dimensions must be positive");
    for (int s = 0; s < cfg.settings; ++s) {
      std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(d) * 100003ULL + s));
      jobs.push_back({d, s, random_box(d, rng)});
    }
  }
  const std::size_t per_job = cfg.methods.size() * cfg.n.size();
  rep.runs.resize(jobs.size() * per_job);
  // Settings run in parallel; each estimate is single-threaded.
  parallel_for(jobs.size(), resolve_threads(cfg.threads), [&](std::size_t j) {
    const Job& job = jobs[j];
    const NvmModel model(job.box.corr, mix);
    std::size_t k = j * per_job;
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      const BenchMethod method = cfg.methods[m];
      for (std::size_t i = 0; i < cfg.n.size(); ++i) {
        RqmcConfig rc;
        rc.B = cfg.B;
        rc.n0 = static_cast<int>(cfg.n[i]);
        rc.ci_mult = cfg.ci_mult;
        rc.tol = 0.0;
        rc.i_max = 0;
        rc.threads = 1;
        rc.method = method == BenchMethod::mc || method == BenchMethod::mc_reordered
                        ? PointSet::pseudo
                        : PointSet::sobol;
        ProbOptions opt;
        opt.reorder = method == BenchMethod::mc_reordered || method == BenchMethod::rqmc_reordered;
        const RqmcResult r = prob(job.box.lower, job.box.upper, model, rc,
                                  derive_seed(seed ^ 0xbe11c0de, j * 1000 + m * 100 + i), opt);
        rep.runs[k++] = {job.dim, job.setting, method, cfg.n[i], r.estimate, r.error};
      }
    }
  });

  std::map<std::tuple<int, int, std::int64_t>, std::pair<double, int>> acc;
  for (const auto& r : rep.runs) {
    auto& a = acc[{r.dim, static_cast<int>(r.method), r.n}];
    a.first += r.error;
    a.second += 1;
  }
  for (int d : cfg.dims) {
    for (BenchMethod method : cfg.methods) {
      std::vector<double> lx, ly;
      for (std::int64_t n : cfg.n) {
        const auto& a = acc[{d, static_cast<int>(method), n}];
        const double mean = a.first / a.second;
        rep.summary.push_back({d, method, n, mean});
        if (mean > 0.0) {
          lx.push_back(std::log(static_cast<double>(n)));
          ly.push_back(std::log(mean));
        }
      }
      const auto [slope, intercept] =
          lx.size() >= 2 ? linear_fit(lx, ly) : std::pair{std::nan(""), std::nan("")};
      rep.slopes.push_back({d, method, slope, intercept});
    }
  }
  return rep;
}

ReorderingReport bench_reordering(const ReorderingConfig& cfg, std::uint64_t seed) {
  if (cfg.d_min < 1 || cfg.d_max < cfg.d_min) throw DomainError("invalid dimension range");
  if (cfg.samples < 2) throw DomainError("at least two samples are needed");
  ReorderingReport rep;
  rep.rows.resize(cfg.settings);
  parallel_for(static_cast<std::size_t>(cfg.settings), resolve_threads(cfg.threads),
               [&](std::size_t s) {
    std::mt19937_64 rng(derive_seed(seed, s));
    const int d = std::uniform_int_distribution<int>(cfg.d_min, cfg.d_max)(rng);
    const double nu = std::uniform_real_distribution<double>(cfg.nu_min, cfg.nu_max)(rng);
    const BoxSetting box = random_box(d, rng);
    const MixtureSpec mix = MixtureSpec::inverse_gamma(nu);
    const OrderedProblem plain = natural_order(box.lower, box.upper, box.corr);
    const OrderedProblem sorted = reorder(box.lower, box.upper, box.corr, mean_sqrt_w(mix));

    // Welford updates for both integrands on common uniforms.
    std::uniform_real_distribution<double> unif;
    std::vector<double> u(d);
    double m0 = 0, s0 = 0, m1 = 0, s1 = 0;
    for (int i = 0; i < cfg.samples; ++i) {
      for (double& x : u) {
        do x = unif(rng);
        while (x == 0.0);
      }
      const double g0 = integrand_g(u, plain, mix);
      const double g1 = integrand_g(u, sorted, mix);
      const double k = i + 1.0;
      const double d0 = g0 - m0, d1 = g1 - m1;
      m0 += d0 / k;
      m1 += d1 / k;
      s0 += d0 * (g0 - m0);
      s1 += d1 * (g1 - m1);
    }
    const double v0 = s0 / (cfg.samples - 1), v1 = s1 / (cfg.samples - 1);
    const double ratio = v0 == v1 ? 1.0 : v1 / v0;
    rep.rows[s] = {static_cast<int>(s), d, nu, v0, v1, ratio};
  });
  for (const auto& r : rep.rows)
    if (!(r.ratio < 1.0)) ++rep.exceedances;
  rep.exceedance_fraction = cfg.settings > 0 ? static_cast<double>(rep.exceedances) / cfg.settings : 0.0;
  return rep;
}

}  // namespace nvmix
