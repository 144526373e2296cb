#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include "spen/core.hpp"
#include "spen/penalty.hpp"
#include "spen/problems.hpp"
#include "spen/random.hpp"
#include "spen/stats.hpp"

namespace spen {

// ---- Monte-Carlo replication --------------------------------------------

struct MonteCarloOptions {
  std::size_t threads = 1;
  std::vector<std::size_t> order;  // execution order of replications; empty = 0..reps-1
};

struct ReplicationOutcome {
  std::vector<double> values;
  bool ok = false;
  std::string error;
};

struct MonteCarloResult {
  std::vector<std::string> names;
  std::vector<ExpectationEstimate> estimates;
  std::vector<ReplicationOutcome> replications;  // indexed by replication id
  std::size_t failures = 0;
  bool partial = false;

  const ExpectationEstimate& operator[](const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return estimates[i];
    throw Error("no tracked quantity named '" + name + "'");
  }
};

// Runs `run(rep, stream)` for rep = 0..reps-1 on stream root.child(rep); each
// call returns one value per tracked name. Results are stored by replication
// id and aggregated in id order, so the schedule never changes the numbers.
template <class Run>
MonteCarloResult monte_carlo(const std::vector<std::string>& names, Run&& run, std::size_t reps,
                             std::uint64_t base_seed, const MonteCarloOptions& opt = {}) {
  if (reps < 30) throw ConfigError("monte_carlo needs at least 30 replications");
  if (names.empty()) throw ConfigError("monte_carlo needs at least one tracked quantity");
  std::vector<std::size_t> order = opt.order;
  if (order.empty()) {
    order.resize(reps);
    std::iota(order.begin(), order.end(), std::size_t{0});
  } else {
    std::vector<std::size_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
      if (sorted.size() != reps || sorted[i] != i) throw ConfigError("replication order must permute 0..reps-1");
  }

  const RandomStream root(base_seed);
  MonteCarloResult out;
  out.names = names;
  out.replications.resize(reps);
  auto execute = [&](std::size_t rep) {
    ReplicationOutcome& slot = out.replications[rep];
    try {
      slot.values = run(rep, root.child(rep));
      if (slot.values.size() != names.size()) throw Error("replication returned the wrong number of values");
      slot.ok = true;
    } catch (const std::exception& e) {
      slot.ok = false;
      slot.values.clear();
      slot.error = e.what();
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(opt.threads, reps));
  if (threads == 1) {
    for (std::size_t rep : order) execute(rep);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < order.size(); i = next++) execute(order[i]);
      });
    for (auto& th : pool) th.join();
  }

  for (const auto& r : out.replications)
    if (!r.ok) ++out.failures;
  out.partial = static_cast<double>(out.failures) > 0.05 * static_cast<double>(reps);
  for (std::size_t j = 0; j < names.size(); ++j) {
    std::vector<double> column;
    column.reserve(reps);
    for (const auto& r : out.replications)
      if (r.ok) column.push_back(r.values[j]);
    out.estimates.push_back(estimate_mean(column));
  }
  return out;
}

// ---- log-log slope -----------------------------------------------------

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Least squares of log(calls) on log(1/epsilon).
inline SlopeFit slope_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw ConfigError("slope_fit needs at least 3 points");
  std::vector<double> xs, ys;
  for (auto [eps, calls] : points) {
    if (!(eps > 0.0) || !(calls > 0.0)) throw ConfigError("slope_fit needs positive epsilon and oracle calls");
    xs.push_back(std::log(1.0 / eps));
    ys.push_back(std::log(calls));
  }
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw ConfigError("slope_fit needs at least two distinct epsilon values");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

// ---- CSV ---------------------------------------------------------------

inline constexpr const char* kRecordHeader = "replication,outer_iter,rho,theta,phi,crit_sq,oracle_calls,wall_ms";

namespace detail {

// Shortest representation that parses back to the same double; NaN is empty.
inline void append_double(std::string& out, double v) {
  if (std::isnan(v)) return;
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

inline void append_uint(std::string& out, std::uint64_t v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

inline double parse_double_field(const std::string& s, const std::string& where) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error(where + ": bad number '" + s + "'");
  return v;
}

inline std::uint64_t parse_uint_field(const std::string& s, const std::string& where) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(where + ": bad integer '" + s + "'");
  return v;
}

}  // namespace detail

inline std::string format_records(std::vector<RunRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    return a.replication != b.replication ? a.replication < b.replication : a.outer_iter < b.outer_iter;
  });
  std::string out = kRecordHeader;
  out += '\n';
  for (const auto& r : records) {
    detail::append_uint(out, r.replication);
    out += ',';
    detail::append_uint(out, r.outer_iter);
    for (double v : {r.rho, r.theta, r.phi, r.crit_sq}) {
      out += ',';
      detail::append_double(out, v);
    }
    out += ',';
    detail::append_uint(out, r.oracle_calls);
    out += ',';
    detail::append_double(out, r.wall_ms);
    out += '\n';
  }
  return out;
}

inline void write_records(const std::vector<RunRecord>& records, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  const std::string text = format_records(records);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  f.close();
  if (!f) throw Error("failed writing '" + path + "'");
}

inline std::vector<RunRecord> parse_records(const std::string& text, const std::string& source = "<csv>") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kRecordHeader) throw Error(source + ": missing or unexpected CSV header");
  std::vector<RunRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    const std::string where = source + ":" + std::to_string(lineno);
    if (fields.size() != 8) throw Error(where + ": expected 8 fields, got " + std::to_string(fields.size()));
    RunRecord r;
    r.replication = detail::parse_uint_field(fields[0], where);
    r.outer_iter = detail::parse_uint_field(fields[1], where);
    r.rho = detail::parse_double_field(fields[2], where);
    r.theta = detail::parse_double_field(fields[3], where);
    r.phi = detail::parse_double_field(fields[4], where);
    r.crit_sq = detail::parse_double_field(fields[5], where);
    r.oracle_calls = detail::parse_uint_field(fields[6], where);
    r.wall_ms = detail::parse_double_field(fields[7], where);
    out.push_back(r);
  }
  return out;
}

inline std::vector<RunRecord> read_records(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_records(ss.str(), path);
}

// ---- certifying the algorithm -------------------------------------------

struct AlgorithmCertification {
  CriticalityCertificate certificate;
  std::vector<RunRecord> records;  // all replications, (replication, outer_iter) order
  ExpectationEstimate oracle_calls;
  std::size_t steering_violations = 0;  // rho < rho_prev + tau or phi < rho xi theta - 10 tol
  std::size_t kappa_violations = 0;
  std::size_t early_stops = 0;
  std::vector<std::string> errors;
};

struct CertifyOptions {
  std::size_t threads = 1;
  bool record_timing = false;
  std::vector<std::size_t> order;
};

// Re-runs the full driver per replication and averages the criticality
// residual and theta over the terminal iterates. Replication r uses stream
// root(seed).child(r); its certification draw (when the exact objective is
// missing) uses child(max_outer + 1) of that stream.
inline AlgorithmCertification certify_algorithm(const ConstrainedProblem& p, const PenaltyConfig& cfg,
                                                std::size_t replications, std::uint64_t seed,
                                                const CertifyOptions& copt = {}) {
  cfg.validate();
  std::vector<PenaltyRunResult> runs(replications);
  const double steer_tol = 10.0 * kBallTol;
  auto run = [&](std::size_t rep, const RandomStream& stream) {
    PenaltyRunOptions opt;
    opt.replication = rep;
    opt.record_timing = copt.record_timing;
    PenaltyRunResult r = run_penalty(p, cfg, stream, opt);
    const double crit = std::isnan(r.crit_sq)
                            ? criticality_draw(p, r.final_state.x, r.lambda, stream.child(cfg.max_outer + 1))
                            : r.crit_sq;
    std::vector<double> v{crit, r.final_state.theta, static_cast<double>(r.final_state.cumulative_oracle_calls)};
    runs[rep] = std::move(r);
    return v;
  };
  MonteCarloOptions mopt;
  mopt.threads = copt.threads;
  mopt.order = copt.order;
  const auto mc = monte_carlo({"crit_sq", "theta", "oracle_calls"}, run, replications, seed, mopt);

  AlgorithmCertification out;
  CriticalityCertificate& c = out.certificate;
  c.crit_sq = mc["crit_sq"];
  c.theta = mc["theta"];
  out.oracle_calls = mc["oracle_calls"];
  c.replications = replications;
  c.epsilon = cfg.epsilon;
  c.partial = mc.partial;
  c.verdict = !mc.partial && std::isfinite(c.crit_sq.std_error) && std::isfinite(c.theta.std_error) &&
              certificate_verdict(c.crit_sq, c.theta, cfg.epsilon);

  Vector lambda_sum;
  std::size_t ok = 0;
  for (std::size_t rep = 0; rep < replications; ++rep) {
    if (!mc.replications[rep].ok) {
      out.errors.push_back("replication " + std::to_string(rep) + ": " + mc.replications[rep].error);
      continue;
    }
    const auto& r = runs[rep];
    lambda_sum = ok == 0 ? r.lambda : Vector(lambda_sum + r.lambda);
    ++ok;
    out.records.insert(out.records.end(), r.records.begin(), r.records.end());
    out.kappa_violations += r.kappa_violations;
    if (r.early_stopped) ++out.early_stops;
    for (const auto& s : r.steering)
      if (s.rho < s.rho_prev + cfg.tau || s.phi < s.rho * cfg.xi * s.theta - steer_tol) ++out.steering_violations;
  }
  if (ok > 0) c.lambda = lambda_sum / static_cast<double>(ok);

  // Theoretical bound on E[theta] after the outer iterations actually run.
  std::size_t N = cfg.max_outer;
  for (std::size_t rep = 0; rep < replications; ++rep)
    if (mc.replications[rep].ok) N = std::min(N, runs[rep].final_state.k);
  c.bound_theta = theta_bound(p.constants, cfg, N);
  if (c.bound_theta) c.bound_verdict = *c.bound_theta <= std::sqrt(cfg.epsilon);
  return out;
}

}  // namespace spen
