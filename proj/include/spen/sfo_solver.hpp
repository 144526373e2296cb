#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spen/core.hpp"
#include "spen/problem.hpp"
#include "spen/prox.hpp"
#include "spen/random.hpp"

namespace spen {

struct SolverBudget {
  std::uint64_t n_bar = 1;  // total oracle-call budget
  std::uint64_t m = 1;      // batch size
  double gamma = 1.0;
  double L = 1.0;  // composite Lipschitz constant
  double d_tilde = 1.0;
  double d1_tilde = 1.0;
  double d2_tilde = 1.0;
  std::optional<double> mu;  // zeroth-order only

  // Iteration cap N = ceil(n_bar / m).
  std::uint64_t iterations() const { return (n_bar + m - 1) / m; }
};

namespace detail {

// Smallest integer >= v, treating values within rounding of an integer as
// that integer.
inline std::uint64_t ceil_count(double v) {
  if (!std::isfinite(v) || v > 9.0e18) throw ConfigError("budget exceeds the representable range");
  if (v <= 1.0) return 1;
  const double r = std::round(v);
  if (std::abs(v - r) <= 1e-9 * v) return static_cast<std::uint64_t>(r);
  return static_cast<std::uint64_t>(std::ceil(v));
}

inline void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be finite and > 0");
}

inline void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be finite and >= 0");
}

}  // namespace detail

// Probability of stopping at k = 1..N, proportional to gamma_k - L gamma_k^2/2.
// Indices with zero weight get zero mass.
inline std::vector<double> stopping_pmf(const std::vector<double>& gammas, double L) {
  detail::require_nonnegative(L, "L");
  std::vector<double> w(gammas.size());
  double total = 0.0;
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    const double g = gammas[k];
    if (!(g > 0.0) || (L > 0.0 && g > 2.0 / L * (1.0 + 1e-12)))
      throw ConfigError("stopping_pmf: step sizes must lie in (0, 2/L]");
    w[k] = std::max(0.0, g - 0.5 * L * g * g);
    if (L > 0.0 && std::abs(g - 2.0 / L) <= 1e-12 * g) w[k] = 0.0;
    total += w[k];
  }
  if (!(total > 0.0)) throw ConfigError("stopping_pmf: all weights are zero");
  for (double& x : w) x /= total;
  return w;
}

// Budget for the first-order method at accuracy epsilon.
inline SolverBudget sfo_budget(double epsilon, double d_phi, double L, double sigma, double d_tilde) {
  detail::require_positive(epsilon, "epsilon");
  detail::require_nonnegative(d_phi, "d_phi");
  detail::require_positive(L, "L");
  detail::require_nonnegative(sigma, "sigma");
  detail::require_positive(d_tilde, "d_tilde");
  const double C1 = sigma * sigma / d_tilde;
  const double C2 = 8.0 * sigma / std::sqrt(d_tilde);
  const double C3 = 6.0 * sigma * std::sqrt(d_tilde);
  const double lead = d_phi * C2 + L * C3;
  const double n_bar = std::max(lead * lead / (epsilon * epsilon) + 32.0 * L * d_phi / epsilon, C1 / (L * L));
  SolverBudget b;
  b.n_bar = detail::ceil_count(n_bar);
  const double nb = static_cast<double>(b.n_bar);
  b.m = detail::ceil_count(std::min(nb, std::max(1.0, sigma / L * std::sqrt(nb / d_tilde))));
  b.gamma = 1.0 / L;
  b.L = L;
  b.d_tilde = d_tilde;
  return b;
}

struct NscoTrajectoryPoint {
  double merit = std::numeric_limits<double>::quiet_NaN();  // f + rho||c|| at x_k, if f is known
  double grad_map_sq = 0.0;                                 // ||P_gamma(x_k, G_k)||^2
  double step_norm = 0.0;                                   // ||x_{k+1} - x_k||
};

struct NscoRunResult {
  Vector x_R;
  Vector G_R;
  std::uint64_t R = 1;
  std::uint64_t oracle_calls = 0;
  ProxResult prox_at_R;  // prox step at (x_R, G_R); holds P_gamma and the multiplier
  std::vector<NscoTrajectoryPoint> trajectory;
};

struct NscoOptions {
  std::optional<std::uint64_t> forced_stop;  // use this R instead of sampling
  bool record_trajectory = false;
  SubsolverOptions prox{kProxTol, 100000};
};

// f(x) + rho||c(x)||, available when the exact objective is known.
inline double penalty_merit(const ConstrainedProblem& p, double rho, const Vector& x) {
  if (!p.true_objective) return std::numeric_limits<double>::quiet_NaN();
  return p.true_objective->value(x) + rho * eval_constraints(p, x).c.norm();
}

inline ProxResult prox_at(const ConstrainedProblem& p, double rho, const Vector& x, const Vector& g, double gamma,
                          const SubsolverOptions& opt = {kProxTol, 100000}) {
  const auto ev = eval_constraints(p, x);
  return prox_step(x, g, ev.c, ev.J, rho, gamma, opt);
}

namespace detail {

// Shared iteration of the first- and zeroth-order methods. `batch(x, stream,
// calls)` returns the averaged gradient estimate and adds its oracle calls.
template <class Batch>
NscoRunResult run_nsco(const ConstrainedProblem& p, double rho, const Vector& x_init, const SolverBudget& budget,
                       const RandomStream& stream, const NscoOptions& opt, std::uint64_t calls_per_batch,
                       Batch&& batch) {
  if (x_init.size() != static_cast<Eigen::Index>(p.n)) throw ConfigError("x_init has the wrong length");
  if (budget.m == 0 || budget.n_bar == 0) throw ConfigError("budget must have n_bar >= 1 and m >= 1");
  require_positive(budget.gamma, "gamma");
  require_nonnegative(rho, "rho");
  const std::uint64_t N = budget.iterations();

  std::uint64_t R = 0;
  if (opt.forced_stop) {
    R = *opt.forced_stop;
    if (R == 0) throw ConfigError("forced stopping index must be >= 1");
  } else {
    // Constant steps give equal weights, so the law is uniform on 1..N unless
    // gamma = 2/L zeroes every weight.
    stopping_pmf({budget.gamma}, budget.L);
    auto eng = stream.child(0).engine();
    std::uniform_int_distribution<std::uint64_t> dist(1, N);
    R = dist(eng);
  }
  if (R * budget.m > budget.n_bar + budget.m && !opt.forced_stop)
    throw BudgetExceeded("stopping index exceeds the oracle budget");

  NscoRunResult out;
  out.R = R;
  std::uint64_t calls = 0;
  Vector x = x_init;
  if (opt.record_trajectory) out.trajectory.reserve(R);
  for (std::uint64_t k = 1; k < R; ++k) {
    const Vector G = batch(x, stream.child(k), calls);
    const auto ev = eval_constraints(p, x);
    const ProxResult pr = prox_step(x, G, ev.c, ev.J, rho, budget.gamma, opt.prox);
    if (opt.record_trajectory)
      out.trajectory.push_back({penalty_merit(p, rho, x), pr.p_gamma.squaredNorm(), pr.step.norm()});
    x = pr.x_plus;
    if (!x.allFinite()) throw DomainError("iterate became non-finite at inner iteration " + std::to_string(k));
  }
  out.G_R = batch(x, stream.child(R), calls);
  out.prox_at_R = prox_at(p, rho, x, out.G_R, budget.gamma, opt.prox);
  if (opt.record_trajectory)
    out.trajectory.push_back(
        {penalty_merit(p, rho, x), out.prox_at_R.p_gamma.squaredNorm(), out.prox_at_R.step.norm()});
  out.x_R = std::move(x);
  out.oracle_calls = calls;
  if (calls != R * calls_per_batch) throw Error("oracle accounting mismatch");
  return out;
}

}  // namespace detail

// Stochastic first-order method for min f(x) + rho||c(x)||: sample the
// stopping index R, take R-1 prox-linear steps on batch gradients and return
// x_R with a fresh batch gradient there.
inline NscoRunResult solve_nsco_sfo(const ConstrainedProblem& p, double rho, const Vector& x_init,
                                    const SolverBudget& budget, const RandomStream& stream,
                                    const NscoOptions& opt = {}) {
  if (!p.oracle || !p.oracle->has_first_order())
    throw OracleKindError("problem '" + p.name + "' has no first-order oracle");
  return detail::run_nsco(p, rho, x_init, budget, stream, opt, budget.m,
                          [&](const Vector& x, const RandomStream& s, std::uint64_t& calls) {
                            OracleLedger ledger;
                            Vector g = batch_gradient(p, x, budget.m, s, &ledger);
                            calls += ledger.total();
                            return g;
                          });
}

}  // namespace spen
