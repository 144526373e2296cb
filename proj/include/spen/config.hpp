#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "spen/core.hpp"
#include "spen/penalty.hpp"
#include "spen/problems.hpp"

namespace spen {

enum class Subcommand { solve, certify, sweep, validate };

inline const char* to_string(Subcommand s) {
  switch (s) {
    case Subcommand::solve: return "solve";
    case Subcommand::certify: return "certify";
    case Subcommand::sweep: return "sweep";
    case Subcommand::validate: return "validate";
  }
  return "?";
}

inline std::optional<Subcommand> parse_subcommand(const std::string& s) {
  if (s == "solve") return Subcommand::solve;
  if (s == "certify") return Subcommand::certify;
  if (s == "sweep") return Subcommand::sweep;
  if (s == "validate") return Subcommand::validate;
  return std::nullopt;
}

struct RunConfig {
  std::optional<Subcommand> subcommand;
  TestProblemSpec problem;
  PenaltyConfig penalty;
  std::size_t replications = 100;
  std::uint64_t seed = 0;
  std::optional<std::string> output;
  std::size_t threads = 1;
  std::vector<double> sweep_epsilons{0.4, 0.2, 0.1};
  bool record_timing = false;
};

inline bool operator==(const TestProblemSpec& a, const TestProblemSpec& b) {
  auto same_x0 = [&] {
    if (a.x0.has_value() != b.x0.has_value()) return false;
    return !a.x0 || (a.x0->size() == b.x0->size() && *a.x0 == *b.x0);
  };
  return a.family == b.family && a.n == b.n && a.sigma == b.sigma && a.a == b.a && same_x0() &&
         a.first_order == b.first_order && a.zeroth_order == b.zeroth_order;
}

inline bool operator==(const PenaltyConfig& a, const PenaltyConfig& b) {
  return a.epsilon == b.epsilon && a.xi == b.xi && a.tau == b.tau && a.rho0 == b.rho0 && a.max_outer == b.max_outer &&
         a.mode == b.mode && a.early_stop == b.early_stop && a.d_tilde == b.d_tilde && a.d1_tilde == b.d1_tilde &&
         a.d2_tilde == b.d2_tilde;
}

inline bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.subcommand == b.subcommand && a.problem == b.problem && a.penalty == b.penalty &&
         a.replications == b.replications && a.seed == b.seed && a.output == b.output && a.threads == b.threads &&
         a.sweep_epsilons == b.sweep_epsilons && a.record_timing == b.record_timing;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class ConfigReader {
 public:
  ConfigReader(std::size_t line, std::string field) : line_(line), field_(std::move(field)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("line " + std::to_string(line_) + ", field '" + field_ + "': " + what);
  }

  double number(const std::string& v) const {
    double out = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
      fail("expected a finite number, got '" + v + "'");
    return out;
  }

  std::uint64_t integer(const std::string& v) const {
    std::uint64_t out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
      fail("expected a nonnegative integer, got '" + v + "'");
    return out;
  }

  bool boolean(const std::string& v) const {
    if (v == "true") return true;
    if (v == "false") return false;
    fail("expected true or false, got '" + v + "'");
  }

  std::vector<double> numbers(const std::string& v) const {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(number(trim(item)));
    if (out.empty()) fail("expected a comma-separated list of numbers");
    return out;
  }

 private:
  std::size_t line_;
  std::string field_;
};

}  // namespace detail

// Flat sectioned key = value text:
//   [problem] family, n, sigma, a, x0, first_order, zeroth_order
//   [penalty] epsilon, xi, tau, rho0, max_outer, mode, early_stop, d_tilde, d1_tilde, d2_tilde
//   [run]     command, replications, seed, output, threads, epsilons, timing
// '#' starts a comment. family and epsilon are required.
inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw, section;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  std::size_t x0_line = 0;
  bool have_family = false, have_epsilon = false;

  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "problem" && section != "penalty" && section != "run")
        throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' appears before any section");
    const std::string full = section + "." + key;
    const detail::ConfigReader r(lineno, full);
    if (!seen.insert(full).second) r.fail("duplicate key");

    if (section == "problem") {
      if (key == "family") {
        try {
          cfg.problem.family = parse_family(val);
        } catch (const ConfigError& e) {
          r.fail(e.what());
        }
        have_family = true;
      } else if (key == "n") {
        cfg.problem.n = r.integer(val);
        if (cfg.problem.n == 0) r.fail("n must be >= 1");
      } else if (key == "sigma") {
        cfg.problem.sigma = r.number(val);
        if (cfg.problem.sigma < 0.0) r.fail("sigma must be >= 0");
      } else if (key == "a") {
        cfg.problem.a = r.number(val);
        if (cfg.problem.a < 0.0) r.fail("a must be >= 0");
      } else if (key == "x0") {
        const auto xs = r.numbers(val);
        cfg.problem.x0 = Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
        x0_line = lineno;
      } else if (key == "first_order") {
        cfg.problem.first_order = r.boolean(val);
      } else if (key == "zeroth_order") {
        cfg.problem.zeroth_order = r.boolean(val);
      } else {
        r.fail("unknown key");
      }
    } else if (section == "penalty") {
      auto& p = cfg.penalty;
      if (key == "epsilon") {
        p.epsilon = r.number(val);
        if (!(p.epsilon > 0.0 && p.epsilon < 1.0)) r.fail("epsilon must lie in (0,1)");
        have_epsilon = true;
      } else if (key == "xi") {
        p.xi = r.number(val);
        if (!(p.xi > 0.0 && p.xi < 1.0)) r.fail("xi must lie in (0,1)");
      } else if (key == "tau") {
        p.tau = r.number(val);
        if (!(p.tau > 0.0)) r.fail("tau must be > 0");
      } else if (key == "rho0") {
        p.rho0 = r.number(val);
        if (!(p.rho0 >= 1.0)) r.fail("rho0 must be >= 1");
      } else if (key == "max_outer") {
        p.max_outer = r.integer(val);
        if (p.max_outer < 1) r.fail("max_outer must be >= 1");
      } else if (key == "mode") {
        if (val == "sfo") p.mode = OracleMode::sfo;
        else if (val == "szo") p.mode = OracleMode::szo;
        else r.fail("mode must be sfo or szo");
      } else if (key == "early_stop") {
        p.early_stop = r.boolean(val);
      } else if (key == "d_tilde" || key == "d1_tilde" || key == "d2_tilde") {
        const double v = r.number(val);
        if (!(v > 0.0)) r.fail(key + " must be > 0");
        (key == "d_tilde" ? p.d_tilde : key == "d1_tilde" ? p.d1_tilde : p.d2_tilde) = v;
      } else {
        r.fail("unknown key");
      }
    } else {
      if (key == "command") {
        cfg.subcommand = parse_subcommand(val);
        if (!cfg.subcommand) r.fail("command must be solve, certify, sweep or validate");
      } else if (key == "replications") {
        cfg.replications = r.integer(val);
        if (cfg.replications < 30) r.fail("replications must be >= 30");
      } else if (key == "seed") {
        cfg.seed = r.integer(val);
      } else if (key == "output") {
        if (val.empty()) r.fail("output path is empty");
        cfg.output = val;
      } else if (key == "threads") {
        cfg.threads = r.integer(val);
        if (cfg.threads < 1) r.fail("threads must be >= 1");
      } else if (key == "epsilons") {
        cfg.sweep_epsilons = r.numbers(val);
        for (double e : cfg.sweep_epsilons)
          if (!(e > 0.0 && e < 1.0)) r.fail("every epsilon must lie in (0,1)");
        if (cfg.sweep_epsilons.size() < 3) r.fail("a sweep needs at least 3 epsilon values");
      } else if (key == "timing") {
        cfg.record_timing = r.boolean(val);
      } else {
        r.fail("unknown key");
      }
    }
  }
  if (!have_family) throw ConfigError("missing required field 'problem.family'");
  if (!have_epsilon) throw ConfigError("missing required field 'penalty.epsilon'");
  if (cfg.problem.x0 && cfg.problem.x0->size() != static_cast<Eigen::Index>(cfg.problem.n))
    throw ConfigError("line " + std::to_string(x0_line) + ", field 'problem.x0': length " +
                      std::to_string(cfg.problem.x0->size()) + " does not match n = " + std::to_string(cfg.problem.n));
  if (cfg.problem.family == Family::RosenEq && cfg.problem.n < 2)
    throw ConfigError("field 'problem.n': ROSEN-EQ needs n >= 2");
  return cfg;
}

// Text that parse_config reads back to an equal RunConfig.
inline std::string serialize(const RunConfig& cfg) {
  using detail::format_double;
  std::ostringstream o;
  const auto& pr = cfg.problem;
  o << "[problem]\n";
  o << "family = " << to_string(pr.family) << "\n";
  o << "n = " << pr.n << "\n";
  o << "sigma = " << format_double(pr.sigma) << "\n";
  o << "a = " << format_double(pr.a) << "\n";
  if (pr.x0) {
    o << "x0 = ";
    for (Eigen::Index i = 0; i < pr.x0->size(); ++i) o << (i ? ", " : "") << format_double((*pr.x0)(i));
    o << "\n";
  }
  o << "first_order = " << (pr.first_order ? "true" : "false") << "\n";
  o << "zeroth_order = " << (pr.zeroth_order ? "true" : "false") << "\n";
  const auto& p = cfg.penalty;
  o << "\n[penalty]\n";
  o << "epsilon = " << format_double(p.epsilon) << "\n";
  o << "xi = " << format_double(p.xi) << "\n";
  o << "tau = " << format_double(p.tau) << "\n";
  o << "rho0 = " << format_double(p.rho0) << "\n";
  o << "max_outer = " << p.max_outer << "\n";
  o << "mode = " << to_string(p.mode) << "\n";
  o << "early_stop = " << (p.early_stop ? "true" : "false") << "\n";
  o << "d_tilde = " << format_double(p.d_tilde) << "\n";
  o << "d1_tilde = " << format_double(p.d1_tilde) << "\n";
  o << "d2_tilde = " << format_double(p.d2_tilde) << "\n";
  o << "\n[run]\n";
  if (cfg.subcommand) o << "command = " << to_string(*cfg.subcommand) << "\n";
  o << "replications = " << cfg.replications << "\n";
  o << "seed = " << cfg.seed << "\n";
  if (cfg.output) o << "output = " << *cfg.output << "\n";
  o << "threads = " << cfg.threads << "\n";
  o << "epsilons = ";
  for (std::size_t i = 0; i < cfg.sweep_epsilons.size(); ++i)
    o << (i ? ", " : "") << format_double(cfg.sweep_epsilons[i]);
  o << "\n";
  o << "timing = " << (cfg.record_timing ? "true" : "false") << "\n";
  return o.str();
}

}  // namespace spen
