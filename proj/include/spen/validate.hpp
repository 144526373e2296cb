#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "spen/brute_force.hpp"
#include "spen/problem.hpp"
#include "spen/problems.hpp"
#include "spen/prox.hpp"
#include "spen/random.hpp"
#include "spen/szo_solver.hpp"

namespace spen {

struct PropertyResult {
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Points for the property checks: the start, plus uniform draws in the
// sampling box or a unit cube around the start.
inline std::vector<Vector> probe_points(const ConstrainedProblem& p, std::size_t count, const RandomStream& s) {
  std::vector<Vector> out{p.x_init};
  const Box box = p.sampling_box ? *p.sampling_box
                                 : Box{p.x_init.array() - 1.0, p.x_init.array() + 1.0};
  auto eng = s.engine();
  while (out.size() < count) out.push_back(uniform_in_box(box, eng));
  return out;
}

}  // namespace detail

inline PropertyResult check_jacobian(const ConstrainedProblem& p, const RandomStream& s) {
  PropertyResult r{"finite-difference Jacobian"};
  double worst = 0.0;
  for (const Vector& x : detail::probe_points(p, 10, s)) {
    const auto ev = eval_constraints(p, x);
    const Matrix fd =
        central_difference_jacobian([&](const Vector& z) -> Vector { return eval_constraints(p, z).c; }, x);
    worst = std::max(worst, (ev.J - fd).norm() / (1.0 + fd.norm()));
  }
  r.passed = worst <= 1e-5;
  r.detail = "max relative error " + detail::fmt(worst);
  return r;
}

inline PropertyResult check_gradient(const ConstrainedProblem& p, const RandomStream& s) {
  PropertyResult r{"finite-difference gradient"};
  if (!p.true_objective) {
    r.skipped = r.passed = true;
    r.detail = "no exact objective";
    return r;
  }
  double worst = 0.0;
  for (const Vector& x : detail::probe_points(p, 10, s)) {
    const Matrix fd = central_difference_jacobian(
        [&](const Vector& z) -> Vector { return Vector::Constant(1, p.true_objective->value(z)); }, x);
    const Vector g = p.true_objective->gradient(x);
    worst = std::max(worst, (g - fd.row(0).transpose()).norm() / (1.0 + g.norm()));
  }
  r.passed = worst <= 1e-5;
  r.detail = "max relative error " + detail::fmt(worst);
  return r;
}

inline PropertyResult check_reference_kkt(const TestProblem& tp) {
  PropertyResult r{"reference KKT residual"};
  if (!tp.known_solution) {
    r.skipped = r.passed = true;
    r.detail = "no reference solution";
    return r;
  }
  const auto& p = tp.problem;
  const auto& ks = *tp.known_solution;
  const auto ev = eval_constraints(p, ks.x);
  const double stat = (p.true_objective->gradient(ks.x) + ev.J.transpose() * ks.lambda).norm();
  const double feas = ev.c.norm();
  r.passed = stat <= 1e-8 && feas <= 1e-8;
  r.detail = "stationarity " + detail::fmt(stat) + ", feasibility " + detail::fmt(feas);
  return r;
}

// Subsolver values at the problem's own (c, J) against grid search.
inline PropertyResult check_subsolvers(const ConstrainedProblem& p, const RandomStream& s) {
  PropertyResult r{"subsolver brute-force equivalence"};
  if (p.n > 3) {
    r.skipped = r.passed = true;
    r.detail = "grid search limited to n <= 3";
    return r;
  }
  double worst = 0.0;
  std::size_t i = 0;
  for (const Vector& x : detail::probe_points(p, 6, s)) {
    auto eng = s.child(++i).engine();
    Vector g(x.size());
    fill_standard_normal(eng, g);
    const double rho = 1.0 + 2.0 * std::abs(g(0));
    const auto ev = eval_constraints(p, x);
    const auto pr = prox_step(x, g, ev.c, ev.J, rho, 0.5);
    auto psi = [&](const Vector& d) { return g.dot(d) + rho * (ev.c + ev.J * d).norm() + d.squaredNorm(); };
    worst = std::max(worst, std::abs(psi(pr.step) - brute_force_prox(g, ev.c, ev.J, rho, 0.5).value));
    worst = std::max(worst, std::abs(theta(ev.c, ev.J).measure - brute_force_theta(ev.c, ev.J)));
    worst = std::max(worst, std::abs(phi(g, ev.c, ev.J, rho).measure - brute_force_phi(g, ev.c, ev.J, rho)));
  }
  r.passed = worst <= 1e-4;
  r.detail = "max deviation " + detail::fmt(worst);
  return r;
}

// |f_mu - f| <= mu^2 L_g n / 2 by Monte-Carlo with 4 standard errors slack.
inline PropertyResult check_smoothing(const ConstrainedProblem& p, const RandomStream& s) {
  PropertyResult r{"smoothing bound"};
  if (!p.true_objective || !p.constants.L_g) {
    r.skipped = r.passed = true;
    r.detail = "needs the exact objective and L_g";
    return r;
  }
  const double mu = 0.1;
  const double bound = 0.5 * mu * mu * *p.constants.L_g * static_cast<double>(p.n);
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  for (const Vector& x : detail::probe_points(p, 5, s)) {
    const auto ref = smoothed_reference(p.true_objective->value, x, mu, 4000, s.child(++i));
    worst = std::max(worst, std::abs(ref.mean - p.true_objective->value(x)) - bound - 4.0 * ref.std_error);
  }
  r.passed = worst <= 0.0;
  r.detail = "max excess over bound " + detail::fmt(worst);
  return r;
}

// SFO draws: mean within 4 standard errors of the gradient, and mean squared
// error within 4 standard errors of sigma^2.
inline PropertyResult check_oracle(const ConstrainedProblem& p, const RandomStream& s) {
  PropertyResult r{"oracle statistics"};
  if (!p.true_objective || !p.oracle || !p.oracle->has_first_order()) {
    r.skipped = r.passed = true;
    r.detail = "needs the exact objective and a first-order oracle";
    return r;
  }
  const std::size_t draws = 4000;
  const Vector& x = p.x_init;
  const Vector g = p.true_objective->gradient(x);
  Vector sum = Vector::Zero(x.size()), sq = Vector::Zero(x.size());
  double err = 0.0, err2 = 0.0;
  for (std::size_t k = 0; k < draws; ++k) {
    const Vector d = sample_sfo(p, x, s.child(k)).gradient() - g;
    sum += d;
    sq += d.cwiseProduct(d);
    err += d.squaredNorm();
    err2 += d.squaredNorm() * d.squaredNorm();
  }
  const double M = static_cast<double>(draws);
  const Vector mean = sum / M;
  const Vector se = ((sq / M - mean.cwiseProduct(mean)) / M).cwiseSqrt();
  bool ok = true;
  for (Eigen::Index j = 0; j < mean.size(); ++j) ok = ok && std::abs(mean(j)) <= 4.0 * se(j) + 1e-12;
  const double mse = err / M;
  const double mse_se = std::sqrt(std::max(0.0, err2 / M - mse * mse) / M);
  const double s2 = p.constants.sigma * p.constants.sigma;
  ok = ok && std::abs(mse - s2) <= 4.0 * mse_se + 1e-12;
  r.passed = ok;
  r.detail = "mean squared error " + detail::fmt(mse) + " vs sigma^2 " + detail::fmt(s2);
  return r;
}

inline std::vector<PropertyResult> run_property_battery(const TestProblem& tp, std::uint64_t seed) {
  const RandomStream root(seed);
  const auto& p = tp.problem;
  return {check_jacobian(p, root.child(0)),   check_gradient(p, root.child(1)), check_reference_kkt(tp),
          check_subsolvers(p, root.child(2)), check_smoothing(p, root.child(3)), check_oracle(p, root.child(4))};
}

}  // namespace spen
