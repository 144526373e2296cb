#pragma once

#include <cmath>
#include <functional>

#include "spen/core.hpp"
#include "spen/problem.hpp"
#include "spen/random.hpp"
#include "spen/sfo_solver.hpp"

namespace spen {

struct SmoothingParams {
  double mu = 0.0;
  std::size_t n = 0;
};

struct SzoEstimatorSample {
  Vector g_mu;
  Vector v;
};

// One two-point draw [F(x + mu v, xi) - F(x, xi)]/mu * v. The direction v
// comes from stream.child(0) and both values share xi = stream.child(1).
inline SzoEstimatorSample gaussian_gradient_sample(const ConstrainedProblem& p, const Vector& x, double mu,
                                                   const RandomStream& stream, OracleLedger* ledger = nullptr) {
  detail::require_positive(mu, "mu");
  SzoEstimatorSample out;
  out.v.resize(x.size());
  auto eng = stream.child(0).engine();
  fill_standard_normal(eng, out.v);
  const RandomStream xi = stream.child(1);
  const Vector shifted = x + mu * out.v;
  const double f_plus = sample_szo(p, shifted, xi, ledger).value();
  const double f_base = sample_szo(p, x, xi, ledger).value();
  out.g_mu = ((f_plus - f_base) / mu) * out.v;
  return out;
}

// Mean of m two-point draws; draw i uses stream.child(i). Costs 2m calls.
inline Vector batch_smoothed_gradient(const ConstrainedProblem& p, const Vector& x, std::size_t m, double mu,
                                      const RandomStream& stream, OracleLedger* ledger = nullptr) {
  if (m == 0) throw ConfigError("batch size m must be >= 1");
  Vector sum = Vector::Zero(x.size());
  for (std::size_t i = 0; i < m; ++i) sum += gaussian_gradient_sample(p, x, mu, stream.child(i), ledger).g_mu;
  return sum / static_cast<double>(m);
}

struct MonteCarloValue {
  double mean = 0.0;
  double std_error = 0.0;
};

// Monte-Carlo estimate of E_v[w(x + mu v)].
inline MonteCarloValue smoothed_reference(const std::function<double(const Vector&)>& w, const Vector& x, double mu,
                                          std::size_t samples, const RandomStream& stream) {
  if (samples < 2) throw ConfigError("smoothed_reference needs at least 2 samples");
  double mean = 0.0, m2 = 0.0;
  Vector v(x.size());
  for (std::size_t i = 0; i < samples; ++i) {
    auto eng = stream.child(i).engine();
    fill_standard_normal(eng, v);
    const double y = w(x + mu * v);
    const double delta = y - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (y - mean);
  }
  const double var = m2 / static_cast<double>(samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(samples))};
}

struct MonteCarloVector {
  Vector mean;
  Vector std_error;
  double second_moment = 0.0;  // mean of ||draw||^2
};

// Monte-Carlo estimate of grad w_mu(x) = E_v[(w(x + mu v) - w(x))/mu v].
inline MonteCarloVector smoothed_gradient_reference(const std::function<double(const Vector&)>& w, const Vector& x,
                                                    double mu, std::size_t samples, const RandomStream& stream) {
  if (samples < 2) throw ConfigError("smoothed_gradient_reference needs at least 2 samples");
  const Eigen::Index n = x.size();
  Vector mean = Vector::Zero(n), m2 = Vector::Zero(n), v(n);
  double sq = 0.0;
  const double w0 = w(x);
  for (std::size_t i = 0; i < samples; ++i) {
    auto eng = stream.child(i).engine();
    fill_standard_normal(eng, v);
    const Vector y = ((w(x + mu * v) - w0) / mu) * v;
    sq += y.squaredNorm();
    const Vector delta = y - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta.cwiseProduct(y - mean);
  }
  MonteCarloVector out;
  out.mean = mean;
  out.std_error = (m2 / static_cast<double>(samples - 1) / static_cast<double>(samples)).cwiseSqrt();
  out.second_moment = sq / static_cast<double>(samples);
  return out;
}

// Variance proxy of one two-point draw: 2(n+4)[kappa_g^2 + sigma^2 + mu^2 L_g^2 (n+4)^2].
inline double smoothed_variance_bound(std::size_t n, double kappa_g, double sigma, double mu, double L_g) {
  const double n4 = static_cast<double>(n) + 4.0;
  return 2.0 * n4 * (kappa_g * kappa_g + sigma * sigma + mu * mu * L_g * L_g * n4 * n4);
}

// Budget for the zeroth-order method at accuracy epsilon.
inline SolverBudget szo_budget(double epsilon, double d_phi, double L, double L_g, std::size_t n, double kappa_g,
                               double sigma, double d1_tilde, double d2_tilde) {
  detail::require_positive(epsilon, "epsilon");
  detail::require_nonnegative(d_phi, "d_phi");
  detail::require_positive(L, "L");
  detail::require_nonnegative(L_g, "L_g");
  detail::require_nonnegative(kappa_g, "kappa_g");
  detail::require_nonnegative(sigma, "sigma");
  detail::require_positive(d1_tilde, "d1_tilde");
  detail::require_positive(d2_tilde, "d2_tilde");
  if (n == 0) throw ConfigError("n must be >= 1");
  const double n4 = static_cast<double>(n) + 4.0;
  const double C1 = 24.0 * n4 * (kappa_g * kappa_g + sigma * sigma) * std::sqrt(d2_tilde);
  const double lead = 16.0 * d_phi / std::sqrt(d2_tilde) + L * C1;
  const double n_bar = std::max(lead * lead / (epsilon * epsilon) + (104.0 * L * L_g * d1_tilde * n4 + 64.0 * L * d_phi) / epsilon,
                                1.0 / (L * L * d2_tilde));
  SolverBudget b;
  b.n_bar = detail::ceil_count(n_bar);
  const double nb = static_cast<double>(b.n_bar);
  b.m = detail::ceil_count(std::min(nb, std::max(1.0, 1.0 / L * std::sqrt(nb / d2_tilde))));
  b.gamma = 1.0 / L;
  b.L = L;
  b.d1_tilde = d1_tilde;
  b.d2_tilde = d2_tilde;
  b.mu = std::sqrt(d1_tilde / nb);
  return b;
}

// Zeroth-order counterpart of solve_nsco_sfo: gradients are replaced by
// averages of m two-point estimates (2m calls per batch).
inline NscoRunResult solve_nsco_szo(const ConstrainedProblem& p, double rho, const Vector& x_init,
                                    const SolverBudget& budget, const RandomStream& stream,
                                    const NscoOptions& opt = {}) {
  if (!p.oracle || !p.oracle->has_zeroth_order())
    throw OracleKindError("problem '" + p.name + "' has no zeroth-order oracle");
  if (!budget.mu) throw ConfigError("zeroth-order budget has no smoothing parameter");
  const double mu = *budget.mu;
  return detail::run_nsco(p, rho, x_init, budget, stream, opt, 2 * budget.m,
                          [&](const Vector& x, const RandomStream& s, std::uint64_t& calls) {
                            OracleLedger ledger;
                            Vector g = batch_smoothed_gradient(p, x, budget.m, mu, s, &ledger);
                            calls += ledger.total();
                            return g;
                          });
}

}  // namespace spen
