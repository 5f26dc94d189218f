#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nvmix/bench.hpp"
#include "nvmix/density.hpp"
#include "nvmix/distribution.hpp"
#include "nvmix/error.hpp"
#include "nvmix/fitting.hpp"
#include "nvmix/gammamix.hpp"
#include "nvmix/linalg.hpp"
#include "nvmix/sampling.hpp"
#include "nvmix/special.hpp"

#ifndef NVMIX_VERSION
#define NVMIX_VERSION "0.0.0"
#endif

namespace nvmix::cli {

using json = nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::optional<double> to_double(const std::string& s) {
  std::string_view v = s;
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  if (v.empty()) return std::nullopt;
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) return std::nullopt;
  return x;
}

// Values inside JSON: non-finite numbers are written as strings.
json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

json vec_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

json nums(const std::vector<double>& v) { return vec_json(v); }

json mat_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(Eigen::VectorXd(m.row(i).transpose())));
  return a;
}

json result_json(const RqmcResult& r) {
  return {{"estimate", num(r.estimate)},
          {"error", num(r.error)},
          {"n", r.n},
          {"iterations", r.iterations},
          {"converged", r.converged}};
}

// Everything needed to rerun a command.
struct Manifest {
  std::string command;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  json to_json(json result) const {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {{"command", command},
            {"args", args},
            {"seed", seed},
            {"version", NVMIX_VERSION},
            {"wall_clock_seconds", secs},
            {"result", std::move(result)}};
  }
};

struct Options {
  std::uint64_t seed = 1;
  int threads = 0;
  double tol = 1e-3;
  std::string mix;
  std::string scale = "identity";
  std::string loc;
  int dim = 0;
  std::string data;
  std::string out;
};

void add_common(CLI::App* app, Options& o) {
  app->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app->add_option("--threads", o.threads,
                  "Worker threads (0: NVMIX_THREADS or 1)")->capture_default_str();
  app->add_option("--tol", o.tol, "Absolute error tolerance")->capture_default_str();
}

void add_model(CLI::App* app, Options& o, bool mix_required = true) {
  auto* m = app->add_option("--mix", o.mix, "Mixing distribution, e.g. inverse.gamma:4");
  if (mix_required) m->required();
  app->add_option("--scale", o.scale, "Scale matrix CSV file or 'identity'")->capture_default_str();
  app->add_option("--loc", o.loc, "Location vector: CSV file or comma-separated values");
  app->add_option("--dim", o.dim, "Dimension when the scale is 'identity'");
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd read_vector(const std::string& spec) {
  if (auto xs = [&]() -> std::optional<std::vector<double>> {
        try {
          return parse_list(spec);
        } catch (const DomainError&) {
          return std::nullopt;
        }
      }())
    return to_vector(*xs);
  const Table t = read_csv(spec);
  if (t.values.rows() != 1 && t.values.cols() != 1)
    throw DomainError(spec + ": expected a single row or column");
  return Eigen::Map<const Eigen::VectorXd>(t.values.data(), t.values.size());
}

// Dimension from, in order: the scale file, --dim, the fallback.
NvmModel build_model(const Options& o, int fallback_dim) {
  Eigen::MatrixXd scale;
  if (o.scale == "identity") {
    const int d = o.dim > 0 ? o.dim : fallback_dim;
    if (d < 1) throw DomainError("the dimension is unknown: pass --dim or a --scale file");
    scale = Eigen::MatrixXd::Identity(d, d);
  } else {
    scale = read_csv(o.scale).values;
    if (o.dim > 0 && o.dim != scale.rows())
      throw DomainError("--dim disagrees with the scale matrix");
  }
  check_scale_matrix(scale);
  Eigen::VectorXd loc = o.loc.empty() ? Eigen::VectorXd::Zero(scale.rows()) : read_vector(o.loc);
  return NvmModel(std::move(loc), std::move(scale), MixtureSpec::parse(o.mix));
}

RqmcConfig rqmc_config(const Options& o) {
  RqmcConfig cfg;
  cfg.tol = o.tol;
  cfg.threads = resolve_threads(o.threads);
  return cfg;
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string s;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) s += ',';
    s += fields[i];
  }
  return s;
}

// Writes rows to --out with the manifest as a leading comment line and
// returns the JSON printed on stdout; without --out the rows go into the JSON.
// Row entries are numbers or strings.
json emit_table(const Options& o, const Manifest& man, const std::vector<std::string>& header,
                const std::vector<json>& rows, json summary) {
  if (o.out.empty()) {
    json r = std::move(summary);
    r["columns"] = header;
    r["rows"] = rows;
    return man.to_json(std::move(r));
  }
  std::ofstream f(o.out);
  if (!f) throw DomainError("cannot write " + o.out);
  json m = man.to_json(summary);
  f << "# " << m.dump() << '\n' << csv_line(header) << '\n';
  for (const json& row : rows) {
    std::vector<std::string> fields;
    for (const json& x : row)
      fields.push_back(x.is_number() ? format_double(x.get<double>()) : x.get<std::string>());
    f << csv_line(fields) << '\n';
  }
  if (!f) throw DomainError("error while writing " + o.out);
  summary["out"] = o.out;
  summary["rows_written"] = rows.size();
  return man.to_json(std::move(summary));
}

FitConfig fit_config(const Options& o) {
  FitConfig cfg;
  cfg.likelihood.rqmc = rqmc_config(o);
  return cfg;
}

json fit_json(const FitResult& r) {
  json trace = json::array();
  for (const auto& e : r.trace) {
    trace.push_back({{"iteration", e.iteration},
                     {"nu", vec_json(e.nu)},
                     {"loglik_before", num(e.loglik_before)},
                     {"loglik", num(e.loglik)},
                     {"loglik_error", num(e.loglik_error)},
                     {"inner_iterations", e.inner_iterations},
                     {"inner_converged", e.inner_converged},
                     {"rel_mu", num(e.rel_mu)},
                     {"rel_sigma", num(e.rel_sigma)},
                     {"rel_nu", num(e.rel_nu)},
                     {"note", e.note}});
  }
  return {{"nu", vec_json(r.nu)},
          {"mu", vec_json(r.mu)},
          {"sigma", mat_json(r.sigma)},
          {"nu0", vec_json(r.nu0)},
          {"c0", num(r.c0)},
          {"start_fallback", r.start_fallback},
          {"converged", r.converged},
          {"trace", std::move(trace)}};
}

// Model from --scale/--loc when a scale file is given, otherwise fitted to --data.
NvmModel model_or_fit(const Options& o, const Eigen::MatrixXd* data, json& info) {
  if (o.scale != "identity" || !data) return build_model(o, data ? static_cast<int>(data->cols()) : 0);
  const MixtureSpec family = MixtureSpec::parse(o.mix);
  const FitResult fr = fit(*data, family, fit_config(o), o.seed);
  info["fit"] = fit_json(fr);
  return NvmModel(fr.mu, fr.sigma, family.with_params(fr.nu));
}

int exit_for(bool converged) { return converged ? kOk : kNotConverged; }

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& tok : split(text)) {
    const auto x = to_double(tok);
    if (!x) throw DomainError("'" + tok + "' is not a number");
    out.push_back(*x);
  }
  return out;
}

Table parse_csv(std::istream& in, const std::string& source) {
  Table t;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::vector<std::string> fields = split(line);
    std::vector<double> row;
    std::optional<std::size_t> bad;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const auto x = to_double(fields[j]);
      if (!x) {
        bad = j;
        break;
      }
      row.push_back(*x);
    }
    if (bad) {
      if (rows.empty() && t.header.empty()) {
        t.header = fields;
        continue;
      }
      std::ostringstream msg;
      msg << source << ": row " << line_no << ", column " << *bad + 1 << ": '" << fields[*bad]
          << "' is not a number";
      throw DomainError(msg.str());
    }
    const std::size_t width = !rows.empty() ? rows.front().size() : t.header.size();
    if (width != 0 && row.size() != width) {
      std::ostringstream msg;
      msg << source << ": row " << line_no << ", column " << std::min(row.size(), width) + 1
          << ": expected " << width << " fields, found " << row.size();
      throw DomainError(msg.str());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DomainError(source + ": no numeric rows");
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) t.values(i, j) = rows[i][j];
  return t;
}

Table read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DomainError("cannot open " + path);
  return parse_csv(f, path);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Normal variance mixtures: distribution, density, fitting and sampling"};
  app.set_version_flag("--version", NVMIX_VERSION);
  app.require_subcommand(1);
  Options o;
  Manifest man;
  man.args = args;

  // prob
  std::string lower_s, upper_s;
  bool no_reorder = false;
  auto* prob_cmd = app.add_subcommand("prob", "P(lower < X <= upper)");
  add_common(prob_cmd, o);
  add_model(prob_cmd, o);
  prob_cmd->add_option("--lower", lower_s, "Lower limits (default -inf)");
  prob_cmd->add_option("--upper", upper_s, "Upper limits")->required();
  prob_cmd->add_flag("--no-reorder", no_reorder, "Keep the original variable order");

  // logdens
  bool closed = false;
  auto* dens_cmd = app.add_subcommand("logdens", "Log-density at each row of a data file");
  add_common(dens_cmd, o);
  add_model(dens_cmd, o);
  dens_cmd->add_option("--data", o.data, "Points, one per row (CSV)")->required();
  dens_cmd->add_option("--out", o.out, "CSV output file");
  dens_cmd->add_flag("--closed", closed, "Use the closed form when the family has one");

  // fit
  FitConfig fcfg;
  bool estimated = false, no_interp = false;
  auto* fit_cmd = app.add_subcommand("fit", "ECME estimation of (nu, mu, Sigma)");
  add_common(fit_cmd, o);
  fit_cmd->add_option("--mix", o.mix, "Family, optionally with starting parameters")->required();
  fit_cmd->add_option("--data", o.data, "Observations, one per row (CSV)")->required();
  fit_cmd->add_option("--tol-nu", fcfg.eps_nu)->capture_default_str();
  fit_cmd->add_option("--tol-mu", fcfg.eps_mu)->capture_default_str();
  fit_cmd->add_option("--tol-sigma", fcfg.eps_sigma)->capture_default_str();
  fit_cmd->add_option("--max-iter", fcfg.max_ecme_iter)->capture_default_str();
  fit_cmd->add_option("--max-inner", fcfg.max_inner_iter)->capture_default_str();
  fit_cmd->add_option("--subsample", fcfg.subsample_size, "Rows for the starting values (0: all)")
      ->capture_default_str();
  fit_cmd->add_flag("--estimated", estimated, "Estimate weights and densities even when closed forms exist");
  fit_cmd->add_flag("--no-interpolate", no_interp, "Estimate every weight afresh");

  // sample
  std::int64_t n_draws = 0;
  std::string method_s = "pseudo";
  auto* sample_cmd = app.add_subcommand("sample", "Draw from the mixture");
  add_common(sample_cmd, o);
  add_model(sample_cmd, o);
  sample_cmd->add_option("--n", n_draws, "Number of draws")->required();
  sample_cmd->add_option("--method", method_s, "pseudo or sobol")
      ->check(CLI::IsMember({"pseudo", "sobol"}))
      ->capture_default_str();
  sample_cmd->add_option("--out", o.out, "CSV output file");

  // qq
  auto* qq_cmd = app.add_subcommand("qq", "Empirical vs theoretical quantiles of D^2");
  add_common(qq_cmd, o);
  add_model(qq_cmd, o);
  qq_cmd->add_option("--data", o.data, "Observations, one per row (CSV)")->required();
  qq_cmd->add_option("--out", o.out, "CSV output file");

  // shortfall
  std::string u_s;
  auto* sf_cmd = app.add_subcommand("shortfall", "Joint quantile shortfall probability Q(u)");
  add_common(sf_cmd, o);
  add_model(sf_cmd, o);
  sf_cmd->add_option("--u", u_s, "Levels in (0,1), comma-separated")->required();
  sf_cmd->add_option("--data", o.data, "Fit the model to these observations first");
  sf_cmd->add_option("--out", o.out, "CSV output file");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Desk-scale experiments");
  bench_cmd->require_subcommand(1);
  ConvergenceConfig ccfg;
  std::string methods_s;
  std::string dims_s = "5,50,100", ns_s;
  auto* conv_cmd = bench_cmd->add_subcommand("convergence", "Estimated error against sample size");
  add_common(conv_cmd, o);
  std::string bench_mix = "inverse.gamma:2";
  conv_cmd->add_option("--mix", bench_mix)->capture_default_str();
  conv_cmd->add_option("--dims", dims_s)->capture_default_str();
  conv_cmd->add_option("--n", ns_s, "Points per randomization, comma-separated");
  conv_cmd->add_option("--settings", ccfg.settings)->capture_default_str();
  conv_cmd->add_option("--methods", methods_s, "Subset of mc,mc_reordered,rqmc,rqmc_reordered");
  conv_cmd->add_option("--out", o.out, "CSV output file");

  ReorderingConfig rcfg;
  auto* reo_cmd = bench_cmd->add_subcommand("reordering", "Integrand variance with and without reordering");
  add_common(reo_cmd, o);
  reo_cmd->add_option("--settings", rcfg.settings)->capture_default_str();
  reo_cmd->add_option("--dmin", rcfg.d_min)->capture_default_str();
  reo_cmd->add_option("--dmax", rcfg.d_max)->capture_default_str();
  reo_cmd->add_option("--numin", rcfg.nu_min)->capture_default_str();
  reo_cmd->add_option("--numax", rcfg.nu_max)->capture_default_str();
  reo_cmd->add_option("--samples", rcfg.samples)->capture_default_str();
  reo_cmd->add_option("--out", o.out, "CSV output file");

  std::vector<std::string> argv_s{"nvmix"};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_s) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kDomain;
  }

  try {
    json doc;
    int code = kOk;
    man.seed = o.seed;
    if (o.tol <= 0.0) throw DomainError("--tol must be positive");

    if (*prob_cmd) {
      man.command = "prob";
      const std::vector<double> upper = parse_list(upper_s);
      const NvmModel model = build_model(o, static_cast<int>(upper.size()));
      const int d = model.dim();
      const std::vector<double> lower =
          lower_s.empty() ? std::vector<double>(d, -kInf) : parse_list(lower_s);
      if (static_cast<int>(upper.size()) != d || static_cast<int>(lower.size()) != d)
        throw DomainError("limits must have one entry per dimension");
      ProbOptions opt;
      opt.reorder = !no_reorder;
      const RqmcResult r = prob(to_vector(lower), to_vector(upper), model, rqmc_config(o), o.seed, opt);
      doc = man.to_json(result_json(r));
      code = exit_for(r.converged);
    } else if (*dens_cmd) {
      man.command = "logdens";
      const Eigen::MatrixXd X = read_csv(o.data).values;
      const NvmModel model = build_model(o, static_cast<int>(X.cols()));
      if (X.cols() != model.dim()) throw DomainError("data columns differ from the model dimension");
      std::vector<json> rows;
      bool all = true;
      if (closed && has_closed_density(model.mixture())) {
        for (Eigen::Index i = 0; i < X.rows(); ++i)
          rows.push_back(nums({closed_log_density(model, X.row(i).transpose()), 0.0, 1.0}));
      } else {
        DensityConfig dc;
        dc.rqmc = rqmc_config(o);
        for (const RqmcResult& r : log_density_batch(X, model, dc, o.seed)) {
          rows.push_back(nums({r.estimate, r.error, r.converged ? 1.0 : 0.0}));
          all = all && r.converged;
        }
      }
      doc = emit_table(o, man, {"log_density", "error", "converged"}, rows,
                       {{"mixture", model.mixture().to_string()}, {"all_converged", all}});
      code = exit_for(all);
    } else if (*fit_cmd) {
      man.command = "fit";
      const Eigen::MatrixXd X = read_csv(o.data).values;
      FitConfig cfg = fcfg;
      cfg.likelihood.rqmc = rqmc_config(o);
      cfg.analytic = !estimated;
      cfg.interpolate_weights = !no_interp;
      const MixtureSpec family = MixtureSpec::parse(o.mix);
      const FitResult r = fit(X, family, cfg, o.seed);
      json res = fit_json(r);
      res["mixture"] = family.with_params(r.nu).to_string();
      doc = man.to_json(std::move(res));
      code = exit_for(r.converged);
    } else if (*sample_cmd) {
      man.command = "sample";
      const NvmModel model = build_model(o, 0);
      const Eigen::MatrixXd X = rnvmix(n_draws, model, o.seed,
                                       method_s == "sobol" ? SamplingMethod::sobol : SamplingMethod::pseudo,
                                       resolve_threads(o.threads));
      std::vector<json> rows;
      for (Eigen::Index i = 0; i < X.rows(); ++i)
        rows.push_back(vec_json(Eigen::VectorXd(X.row(i).transpose())));
      std::vector<std::string> header;
      for (int j = 0; j < model.dim(); ++j) header.push_back("x" + std::to_string(j + 1));
      doc = emit_table(o, man, header, rows, {{"mixture", model.mixture().to_string()}, {"method", method_s}});
    } else if (*qq_cmd) {
      man.command = "qq";
      const Eigen::MatrixXd X = read_csv(o.data).values;
      json info;
      const NvmModel model = model_or_fit(o, &X, info);
      Eigen::VectorXd d2 = mahalanobis_sq_rows(X, model.loc(), model.factor());
      std::sort(d2.data(), d2.data() + d2.size());
      const double n = static_cast<double>(d2.size());
      std::vector<double> p(d2.size());
      for (Eigen::Index i = 0; i < d2.size(); ++i) p[i] = (i + 0.5) / n;
      QuantileConfig qc;
      qc.rqmc = rqmc_config(o);
      const std::vector<double> q = qgammamix(p, {model.dim(), model.mixture()}, qc, o.seed);
      std::vector<json> rows;
      for (Eigen::Index i = 0; i < d2.size(); ++i) rows.push_back(nums({p[i], d2(i), q[i]}));
      info["mixture"] = model.mixture().to_string();
      doc = emit_table(o, man, {"p", "empirical_d2", "theoretical_quantile"}, rows, info);
    } else if (*sf_cmd) {
      man.command = "shortfall";
      std::optional<Eigen::MatrixXd> X;
      if (!o.data.empty()) X = read_csv(o.data).values;
      json info;
      const NvmModel model = model_or_fit(o, X ? &*X : nullptr, info);
      const NvmModel normal = model.with_mixture(MixtureSpec::constant());
      QuantileConfig qc;
      qc.rqmc = rqmc_config(o);
      std::vector<json> rows;
      bool all = true;
      for (double u : parse_list(u_s)) {
        const RqmcResult q = shortfall_prob(u, model, qc, o.seed);
        const RqmcResult q0 = shortfall_prob(u, normal, qc, o.seed);
        all = all && q.converged && q0.converged;
        rows.push_back(
            nums({u, q.estimate, q.error, q0.estimate, q0.error, q.estimate / q0.estimate}));
      }
      info["mixture"] = model.mixture().to_string();
      info["all_converged"] = all;
      doc = emit_table(o, man, {"u", "shortfall", "error", "normal_shortfall", "normal_error", "ratio"},
                       rows, info);
      code = exit_for(all);
    } else if (*conv_cmd) {
      man.command = "bench convergence";
      ccfg.dims.clear();
      for (double d : parse_list(dims_s)) ccfg.dims.push_back(static_cast<int>(d));
      if (!ns_s.empty()) {
        ccfg.n.clear();
        for (double n : parse_list(ns_s)) ccfg.n.push_back(static_cast<std::int64_t>(n));
      }
      if (!methods_s.empty()) {
        ccfg.methods.clear();
        std::stringstream ss(methods_s);
        for (std::string m; std::getline(ss, m, ',');) ccfg.methods.push_back(parse_bench_method(trim(m)));
      }
      ccfg.threads = resolve_threads(o.threads);
      const ConvergenceReport rep = bench_convergence(MixtureSpec::parse(bench_mix), ccfg, o.seed);
      std::vector<json> rows;
      json slopes = json::array();
      for (const auto& s : rep.summary) {
        double slope = kNaN;
        for (const auto& sl : rep.slopes)
          if (sl.dim == s.dim && sl.method == s.method) slope = sl.slope;
        rows.push_back({s.dim, to_string(s.method), s.n, num(s.mean_error), num(slope)});
      }
      for (const auto& sl : rep.slopes)
        slopes.push_back({{"dim", sl.dim}, {"method", to_string(sl.method)}, {"slope", num(sl.slope)}});
      doc = emit_table(o, man, {"dim", "method", "n", "mean_abs_error", "slope"}, rows,
                       {{"mixture", bench_mix}, {"slopes", slopes}});
    } else if (*reo_cmd) {
      man.command = "bench reordering";
      rcfg.threads = resolve_threads(o.threads);
      const ReorderingReport rep = bench_reordering(rcfg, o.seed);
      std::vector<json> rows;
      for (const auto& r : rep.rows)
        rows.push_back({r.setting, r.dim, num(r.nu), num(r.var_original), num(r.var_reordered),
                        num(r.ratio)});
      doc = emit_table(o, man, {"setting", "dim", "nu", "var_original", "var_reordered", "ratio"}, rows,
                       {{"settings", rcfg.settings},
                        {"exceedances", rep.exceedances},
                        {"exceedance_fraction", rep.exceedance_fraction}});
    }
    out << doc.dump(2) << '\n';
    return code;
  } catch (const ConvergenceError& e) {
    err << "nvmix: " << e.what() << '\n';
    return kNotConverged;
  } catch (const DomainError& e) {
    err << "nvmix: " << e.what() << '\n';
    return kDomain;
  } catch (const UnsupportedError& e) {
    err << "nvmix: " << e.what() << '\n';
    return kDomain;
  } catch (const std::exception& e) {
    err << "nvmix: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace nvmix::cli
