#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "spen/core.hpp"
#include "spen/problem.hpp"
#include "spen/prox.hpp"
#include "spen/random.hpp"
#include "spen/sfo_solver.hpp"
#include "spen/stats.hpp"
#include "spen/szo_solver.hpp"

namespace spen {

enum class OracleMode { sfo, szo };

inline const char* to_string(OracleMode m) { return m == OracleMode::sfo ? "sfo" : "szo"; }

struct PenaltyConfig {
  double epsilon = 0.1;
  double xi = 0.5;
  double tau = 1.0;
  double rho0 = 1.0;
  std::size_t max_outer = 5;
  OracleMode mode = OracleMode::sfo;
  bool early_stop = true;
  double d_tilde = 1.0;
  double d1_tilde = 1.0;
  double d2_tilde = 1.0;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
    if (!(xi > 0.0 && xi < 1.0)) throw ConfigError("xi must lie in (0,1)");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be > 0");
    if (!(rho0 >= 1.0) || !std::isfinite(rho0)) throw ConfigError("rho0 must be >= 1");
    if (max_outer < 1) throw ConfigError("max_outer must be >= 1");
    if (!(d_tilde > 0.0) || !std::isfinite(d_tilde)) throw ConfigError("d_tilde must be > 0");
    if (!(d1_tilde > 0.0) || !std::isfinite(d1_tilde)) throw ConfigError("d1_tilde must be > 0");
    if (!(d2_tilde > 0.0) || !std::isfinite(d2_tilde)) throw ConfigError("d2_tilde must be > 0");
  }
};

struct SteeringResult {
  double rho = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  int doublings = 0;
};

// Picks rho >= rho_prev + tau with phi_rho >= rho xi theta, starting from the
// sufficient value ||G||/((1-xi) theta) and doubling while the evaluated
// condition fails.
inline SteeringResult steer_penalty(const Vector& G, const Vector& c, const Matrix& J, double rho_prev, double xi,
                                    double tau, double tol = kBallTol) {
  if (!(xi > 0.0 && xi < 1.0)) throw ConfigError("xi must lie in (0,1)");
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  SteeringResult out;
  out.theta = theta(c, J).measure;
  const double floor = rho_prev + tau;
  if (out.theta <= tol) {
    out.rho = floor;
    out.phi = phi(G, c, J, out.rho).measure;
    return out;
  }
  out.rho = std::max(floor, G.norm() / ((1.0 - xi) * out.theta));
  out.phi = phi(G, c, J, out.rho).measure;
  while (out.phi < out.rho * xi * out.theta - tol) {
    if (out.doublings == 60) throw SteeringError("steering condition still fails after 60 doublings of rho");
    out.rho *= 2.0;
    ++out.doublings;
    out.phi = phi(G, c, J, out.rho).measure;
  }
  return out;
}

inline double penalty_lipschitz(const ProblemConstants& k, double rho) { return k.Lg() + rho * k.LJ(); }

// Bound on f + rho||c|| - f_low over the iterates.
inline double penalty_gap_bound(const ProblemConstants& k, double rho) { return k.kf() + rho * k.kc() - k.f_low; }

// Per-rho budget: the mode's budget at accuracy epsilon/4 with L = L_g + rho L_J
// and D = kappa_f + rho kappa_c - f_low.
inline SolverBudget subproblem_budget_for_rho(double rho, double epsilon, const ProblemConstants& k, OracleMode mode,
                                              std::size_t n, const PenaltyConfig& cfg = {}) {
  if (!(rho >= 1.0)) throw ConfigError("rho must be >= 1");
  const double L = penalty_lipschitz(k, rho);
  const double D = penalty_gap_bound(k, rho);
  if (D < 0.0) throw ConfigError("kappa_f + rho kappa_c is below f_low");
  if (mode == OracleMode::sfo) return sfo_budget(epsilon / 4.0, D, L, k.sigma, cfg.d_tilde);
  return szo_budget(epsilon / 4.0, D, L, k.Lg(), n, k.kg(), k.sigma, cfg.d1_tilde, cfg.d2_tilde);
}

inline double outer_c_bar(double kappa_J, double L_J, double kappa_g, double L_g, double epsilon) {
  detail::require_positive(L_J, "L_J");
  detail::require_positive(L_g, "L_g");
  return kappa_J / L_J + std::sqrt(kappa_g * kappa_g + 0.25 * epsilon) / L_g;
}

inline double outer_c_tilde(double epsilon, double xi, double kappa_g, double L_g, double L_J, double c_bar) {
  const double a = 4.0 * c_bar + std::sqrt(8.0 * c_bar) * std::sqrt(L_g + L_J);
  return std::max(a * a / (xi * xi), std::sqrt(4.0 * kappa_g * kappa_g + epsilon) / (1.0 - xi));
}

// Number of outer iterations after which the driver output is an
// epsilon-stochastic critical point.
inline std::uint64_t outer_iteration_bound(double epsilon, double xi, double tau, double rho0, double kappa_g,
                                           double L_g, double L_J, double c_bar) {
  for (auto [v, name] : {std::pair{epsilon, "epsilon"}, {xi, "xi"}, {tau, "tau"}, {rho0, "rho0"}, {kappa_g, "kappa_g"},
                         {L_g, "L_g"}, {L_J, "L_J"}, {c_bar, "c_bar"}})
    detail::require_positive(v, name);
  const double ct = outer_c_tilde(epsilon, xi, kappa_g, L_g, L_J, c_bar);
  const double v = (ct / std::sqrt(epsilon) - rho0) / tau + 1.0;
  return detail::ceil_count(v);
}

// rho threshold C~ eps^{-1/2}, when the constants allow computing it.
inline std::optional<double> rho_threshold(const ProblemConstants& k, const PenaltyConfig& cfg) {
  if (!k.L_g || !k.L_J || !k.kappa_g || !k.kappa_J || !(*k.L_g > 0.0) || !(*k.L_J > 0.0)) return std::nullopt;
  const double cb = outer_c_bar(*k.kappa_J, *k.L_J, *k.kappa_g, *k.L_g, cfg.epsilon);
  return outer_c_tilde(cfg.epsilon, cfg.xi, *k.kappa_g, *k.L_g, *k.L_J, cb) / std::sqrt(cfg.epsilon);
}

// Right side of the expected-infeasibility bound after N outer iterations,
// when computable.
inline std::optional<double> theta_bound(const ProblemConstants& k, const PenaltyConfig& cfg, std::size_t N) {
  if (!k.L_g || !k.L_J || !k.kappa_g || !k.kappa_J || !(*k.L_g > 0.0) || !(*k.L_J > 0.0)) return std::nullopt;
  const double cb = outer_c_bar(*k.kappa_J, *k.L_J, *k.kappa_g, *k.L_g, cfg.epsilon);
  const double rho_min = cfg.rho0 + static_cast<double>(N - 1) * cfg.tau;
  const double first = (2.0 * cb + std::sqrt(2.0 * cb) * std::sqrt(*k.L_g + *k.L_J)) /
                       (cfg.xi * std::sqrt(rho_min)) * std::pow(cfg.epsilon, 0.25);
  const double second = std::sqrt(*k.kappa_g * *k.kappa_g + 0.25 * cfg.epsilon) / ((1.0 - cfg.xi) * rho_min);
  return first + second;
}

struct PenaltyState {
  std::size_t k = 1;
  Vector x;
  Vector G;
  double rho = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  std::uint64_t cumulative_oracle_calls = 0;
};

struct RunRecord {
  std::uint64_t replication = 0;
  std::uint64_t outer_iter = 0;
  double rho = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  double crit_sq = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t oracle_calls = 0;
  double wall_ms = 0.0;

  // Fields compare bitwise, so two missing crit_sq values are equal.
  friend bool operator==(const RunRecord& a, const RunRecord& b) {
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    return a.replication == b.replication && a.outer_iter == b.outer_iter && same(a.rho, b.rho) &&
           same(a.theta, b.theta) && same(a.phi, b.phi) && same(a.crit_sq, b.crit_sq) &&
           a.oracle_calls == b.oracle_calls && same(a.wall_ms, b.wall_ms);
  }
};

struct SteeringStep {
  std::size_t k = 0;
  double rho_prev = 0.0;
  double rho = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  int doublings = 0;
};

struct PenaltyRunResult {
  PenaltyState final_state;
  Vector lambda;  // multiplier from the final prox step
  double crit_sq = std::numeric_limits<double>::quiet_NaN();
  std::vector<SteeringStep> steering;
  std::vector<RunRecord> records;
  std::size_t subproblems = 0;
  bool early_stopped = false;
  std::size_t kappa_violations = 0;  // outer iterates outside the declared bounds
};

struct PenaltyRunOptions {
  std::uint64_t replication = 0;
  bool record_timing = false;
  double steering_tol = kBallTol;
  SubsolverOptions prox{kProxTol, 100000};
};

// ||grad f(x) + J(x)'lambda||^2 when the exact objective is known, else NaN.
inline double exact_criticality(const ConstrainedProblem& p, const Vector& x, const Vector& lambda) {
  if (!p.true_objective) return std::numeric_limits<double>::quiet_NaN();
  const auto ev = eval_constraints(p, x);
  return (p.true_objective->gradient(x) + ev.J.transpose() * lambda).squaredNorm();
}

namespace detail {

inline std::size_t count_kappa_violations(const ConstrainedProblem& p, const Vector& x, const Vector& c) {
  const auto& k = p.constants;
  std::size_t v = 0;
  if (k.kappa_c && c.norm() > *k.kappa_c) ++v;
  if (p.true_objective) {
    if (k.kappa_g && p.true_objective->gradient(x).norm() > *k.kappa_g) ++v;
    if (k.kappa_f && p.true_objective->value(x) > *k.kappa_f) ++v;
  }
  return v;
}

}  // namespace detail

// The penalty method: at each outer iteration steer rho, then solve the
// penalty subproblem from the current iterate with the per-rho budget.
inline PenaltyRunResult run_penalty(const ConstrainedProblem& p, const PenaltyConfig& cfg, const RandomStream& stream,
                                    const PenaltyRunOptions& opt = {}) {
  cfg.validate();
  p.constants.validate();
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    if (!opt.record_timing) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };
  const auto& k = p.constants;
  auto budget_for = [&](double rho) { return subproblem_budget_for_rho(rho, cfg.epsilon, k, cfg.mode, p.n, cfg); };
  auto batch_at = [&](const Vector& x, const SolverBudget& b, const RandomStream& s, std::uint64_t& calls) {
    OracleLedger ledger;
    Vector g = cfg.mode == OracleMode::sfo ? batch_gradient(p, x, b.m, s, &ledger)
                                           : batch_smoothed_gradient(p, x, b.m, *b.mu, s, &ledger);
    calls += ledger.total();
    return g;
  };
  NscoOptions nopt;
  nopt.prox = opt.prox;

  PenaltyRunResult out;
  const std::optional<double> rho_bar = cfg.early_stop ? rho_threshold(k, cfg) : std::nullopt;
  std::uint64_t calls = 0;
  Vector x = p.x_init;
  const SolverBudget b0 = budget_for(cfg.rho0);
  Vector G = batch_at(x, b0, stream.child(0), calls);
  double rho_prev = cfg.rho0;
  double rho_last = cfg.rho0;
  double gamma_last = b0.gamma;
  std::optional<ProxResult> last_prox;
  Vector lambda_prev;
  std::size_t outer = 1;

  for (; outer < cfg.max_outer; ++outer) {
    const auto ev = eval_constraints(p, x);
    out.kappa_violations += detail::count_kappa_violations(p, x, ev.c);
    const SteeringResult st = steer_penalty(G, ev.c, ev.J, rho_prev, cfg.xi, cfg.tau, opt.steering_tol);
    out.steering.push_back({outer, rho_prev, st.rho, st.theta, st.phi, st.doublings});
    RunRecord rec;
    rec.replication = opt.replication;
    rec.outer_iter = outer;
    rec.rho = st.rho;
    rec.theta = st.theta;
    rec.phi = st.phi;
    if (lambda_prev.size()) rec.crit_sq = exact_criticality(p, x, lambda_prev);
    rec.oracle_calls = calls;
    rec.wall_ms = elapsed_ms();
    out.records.push_back(rec);

    const SolverBudget b = budget_for(st.rho);
    const NscoRunResult res = cfg.mode == OracleMode::sfo ? solve_nsco_sfo(p, st.rho, x, b, stream.child(outer), nopt)
                                                          : solve_nsco_szo(p, st.rho, x, b, stream.child(outer), nopt);
    calls += res.oracle_calls;
    x = res.x_R;
    G = res.G_R;
    last_prox = res.prox_at_R;
    lambda_prev = res.prox_at_R.lambda;
    rho_prev = rho_last = st.rho;
    gamma_last = b.gamma;
    ++out.subproblems;
    if (rho_bar && st.rho >= *rho_bar) {
      out.early_stopped = true;
      ++outer;
      break;
    }
  }
  if (!last_prox) last_prox = prox_at(p, rho_last, x, G, gamma_last, opt.prox);

  const auto ev = eval_constraints(p, x);
  out.kappa_violations += detail::count_kappa_violations(p, x, ev.c);
  PenaltyState& fs = out.final_state;
  fs.k = outer;
  fs.x = x;
  fs.G = G;
  fs.rho = rho_last;
  fs.theta = theta(ev.c, ev.J).measure;
  fs.phi = phi(G, ev.c, ev.J, rho_last).measure;
  fs.cumulative_oracle_calls = calls;
  out.lambda = last_prox->lambda;
  out.crit_sq = exact_criticality(p, x, out.lambda);

  RunRecord rec;
  rec.replication = opt.replication;
  rec.outer_iter = outer;
  rec.rho = rho_last;
  rec.theta = fs.theta;
  rec.phi = fs.phi;
  rec.crit_sq = out.crit_sq;
  rec.oracle_calls = calls;
  rec.wall_ms = elapsed_ms();
  out.records.push_back(rec);
  return out;
}

struct CriticalityCertificate {
  ExpectationEstimate crit_sq;
  ExpectationEstimate theta;
  Vector lambda;
  std::size_t replications = 0;
  double epsilon = 0.0;
  bool partial = false;
  bool verdict = false;
  std::optional<double> bound_theta;  // theoretical bound on E[theta], when computable
  std::optional<bool> bound_verdict;
};

inline bool certificate_verdict(const ExpectationEstimate& crit_sq, const ExpectationEstimate& th, double epsilon) {
  return crit_sq.count > 0 && th.count > 0 && crit_sq.ci95_high <= epsilon && th.ci95_high <= std::sqrt(epsilon);
}

inline constexpr std::size_t kCertificationBatch = 4096;

// One draw of the criticality residual at (x, lambda): exact with the true
// objective, otherwise from a batch of SFO draws with the noise bias removed.
inline double criticality_draw(const ConstrainedProblem& p, const Vector& x, const Vector& lambda,
                               const RandomStream& stream, std::size_t batch = kCertificationBatch) {
  if (p.true_objective) return exact_criticality(p, x, lambda);
  if (!p.oracle || !p.oracle->has_first_order() || !std::isfinite(p.constants.sigma))
    throw CertificationError("certification needs the exact objective or a first-order oracle with known sigma");
  const auto ev = eval_constraints(p, x);
  const Vector g = batch_gradient(p, x, batch, stream);
  const double s2 = p.constants.sigma * p.constants.sigma;
  return (g + ev.J.transpose() * lambda).squaredNorm() - s2 / static_cast<double>(batch);
}

// Certificate for a fixed point and multiplier.
inline CriticalityCertificate certify(const ConstrainedProblem& p, const Vector& x, const Vector& lambda,
                                      double epsilon, std::size_t replications, const RandomStream& stream) {
  if (replications < 30) throw ConfigError("certification needs at least 30 replications");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  const auto ev = eval_constraints(p, x);
  if (lambda.size() != ev.c.size()) throw ConfigError("lambda has the wrong length");
  const double th = theta(ev.c, ev.J).measure;
  std::vector<double> crit(replications), thetas(replications, th);
  for (std::size_t r = 0; r < replications; ++r) crit[r] = criticality_draw(p, x, lambda, stream.child(r));
  CriticalityCertificate out;
  out.crit_sq = estimate_mean(crit);
  out.theta = estimate_mean(thetas);
  out.lambda = lambda;
  out.replications = replications;
  out.epsilon = epsilon;
  out.verdict = certificate_verdict(out.crit_sq, out.theta, epsilon);
  return out;
}

}  // namespace spen
