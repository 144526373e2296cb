#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spen/config.hpp"
#include "spen/harness.hpp"
#include "spen/penalty.hpp"
#include "spen/problems.hpp"
#include "spen/validate.hpp"

namespace spen {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerdictFalse = 1;
inline constexpr int kExitConfigError = 2;

namespace detail {

inline std::string num(double v) {
  if (std::isnan(v)) return "n/a";
  std::ostringstream o;
  o << std::setprecision(6) << v;
  return o.str();
}

inline std::string interval(const ExpectationEstimate& e) {
  return num(e.mean) + " (95% CI " + num(e.ci95_low) + " .. " + num(e.ci95_high) + ", n=" + std::to_string(e.count) +
         ")";
}

inline void print_certificate(std::ostream& out, const AlgorithmCertification& a) {
  const auto& c = a.certificate;
  out << "E[crit_sq]     " << interval(c.crit_sq) << "  target <= " << num(c.epsilon) << "\n";
  out << "E[theta]       " << interval(c.theta) << "  target <= " << num(std::sqrt(c.epsilon)) << "\n";
  out << "lambda (mean)  ";
  for (Eigen::Index i = 0; i < c.lambda.size(); ++i) out << (i ? " " : "") << num(c.lambda(i));
  out << "\n";
  out << "oracle calls   " << interval(a.oracle_calls) << "\n";
  out << "replications   " << c.replications << (c.partial ? " (partial)" : "") << ", failed "
      << a.errors.size() << ", early stops " << a.early_stops << "\n";
  out << "steering violations " << a.steering_violations << ", kappa bound violations " << a.kappa_violations
      << "\n";
  if (c.bound_theta)
    out << "theta bound    " << num(*c.bound_theta) << " -> " << (*c.bound_verdict ? "met" : "not met") << "\n";
  else
    out << "theta bound    not computable for these constants\n";
  out << "verdict        " << (c.verdict ? "true" : "false") << "\n";
}

}  // namespace detail

// Runs one subcommand. The report goes to `out`, diagnostics to `err`.
inline int dispatch(const RunConfig& cfg, Subcommand cmd, std::ostream& out, std::ostream& err) {
  const TestProblem tp = build_problem(cfg.problem);
  const ConstrainedProblem& p = tp.problem;
  CertifyOptions copt;
  copt.threads = cfg.threads;
  copt.record_timing = cfg.record_timing;

  switch (cmd) {
    case Subcommand::solve: {
      PenaltyRunOptions opt;
      opt.record_timing = cfg.record_timing;
      const auto r = run_penalty(p, cfg.penalty, RandomStream(cfg.seed).child(0), opt);
      out << "problem        " << p.name << " (n=" << p.n << ", q=" << p.q << ")\n";
      out << "outer iters    " << r.final_state.k << (r.early_stopped ? " (early stop)" : "") << "\n";
      out << "theta          " << detail::num(r.final_state.theta) << "\n";
      out << "crit_sq        " << detail::num(r.crit_sq) << "\n";
      out << "rho_N          " << detail::num(r.final_state.rho) << "\n";
      out << "oracle calls   " << r.final_state.cumulative_oracle_calls << "\n";
      if (cfg.output) write_records(r.records, *cfg.output);
      return kExitOk;
    }
    case Subcommand::certify: {
      const auto a = certify_algorithm(p, cfg.penalty, cfg.replications, cfg.seed, copt);
      out << "problem        " << p.name << ", epsilon " << detail::num(cfg.penalty.epsilon) << ", mode "
          << to_string(cfg.penalty.mode) << "\n";
      detail::print_certificate(out, a);
      for (const auto& e : a.errors) err << e << "\n";
      if (cfg.output) write_records(a.records, *cfg.output);
      return a.certificate.verdict ? kExitOk : kExitVerdictFalse;
    }
    case Subcommand::sweep: {
      if (cfg.sweep_epsilons.size() < 3) throw ConfigError("a sweep needs at least 3 epsilon values");
      std::vector<std::pair<double, double>> points;
      std::vector<RunRecord> records;
      bool all_true = true;
      for (std::size_t i = 0; i < cfg.sweep_epsilons.size(); ++i) {
        PenaltyConfig pc = cfg.penalty;
        pc.epsilon = cfg.sweep_epsilons[i];
        const auto a = certify_algorithm(p, pc, cfg.replications, cfg.seed, copt);
        out << "== epsilon " << detail::num(pc.epsilon) << "\n";
        detail::print_certificate(out, a);
        for (const auto& e : a.errors) err << e << "\n";
        all_true = all_true && a.certificate.verdict;
        points.emplace_back(pc.epsilon, a.oracle_calls.mean);
        // replication ids are offset per grid point so rows stay unique
        for (RunRecord rec : a.records) {
          rec.replication += i * cfg.replications;
          records.push_back(rec);
        }
      }
      const SlopeFit fit = slope_fit(points);
      out << "slope (log calls vs log 1/eps) " << detail::num(fit.slope) << ", intercept "
          << detail::num(fit.intercept) << ", r2 " << detail::num(fit.r2) << "\n";
      if (cfg.output) write_records(records, *cfg.output);
      return all_true ? kExitOk : kExitVerdictFalse;
    }
    case Subcommand::validate: {
      bool ok = true;
      for (const auto& r : run_property_battery(tp, cfg.seed)) {
        out << (r.skipped ? "SKIP " : r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        if (!r.passed) {
          err << "property failed: " << r.name << "\n";
          ok = false;
        }
      }
      return ok ? kExitOk : kExitVerdictFalse;
    }
  }
  return kExitConfigError;
}

// spen <solve|certify|sweep|validate> --config <path> [--seed N] [--out <path>]
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Penalty methods with stochastic approximation"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_path;
  std::vector<std::pair<Subcommand, CLI::App*>> subs;
  for (Subcommand s : {Subcommand::solve, Subcommand::certify, Subcommand::sweep, Subcommand::validate}) {
    const char* help = s == Subcommand::solve     ? "one seeded driver run"
                       : s == Subcommand::certify ? "Monte-Carlo certification of the driver output"
                       : s == Subcommand::sweep   ? "certify across an epsilon grid and fit the complexity slope"
                                                  : "property checks on the configured problem";
    CLI::App* sub = app.add_subcommand(to_string(s), help);
    sub->add_option("--config", config_path, "configuration file")->required();
    sub->add_option("--seed", seed, "overrides run.seed");
    sub->add_option("--out", out_path, "CSV output path; overrides run.output");
    subs.emplace_back(s, sub);
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  Subcommand cmd = Subcommand::solve;
  for (auto& [s, sub] : subs)
    if (sub->parsed()) cmd = s;

  RunConfig cfg;
  try {
    std::ifstream f(config_path, std::ios::binary);
    if (!f) throw ConfigError("cannot read config file '" + config_path + "'");
    std::ostringstream text;
    text << f.rdbuf();
    cfg = parse_config(text.str());
    if (seed) cfg.seed = *seed;
    if (out_path) cfg.output = *out_path;
    if (cfg.subcommand && *cfg.subcommand != cmd)
      err << "note: run.command = " << to_string(*cfg.subcommand) << " ignored in favour of '" << to_string(cmd)
          << "'\n";
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  try {
    return dispatch(cfg, cmd, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerdictFalse;
  }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run_cli(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace spen
