#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>

#include "spen/core.hpp"
#include "spen/problem.hpp"
#include "spen/random.hpp"

namespace spen {

enum class Family { P1, P2, P3, RosenEq, DebugBadJacobian };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::P1: return "P1";
    case Family::P2: return "P2";
    case Family::P3: return "P3";
    case Family::RosenEq: return "ROSEN-EQ";
    case Family::DebugBadJacobian: return "DEBUG-BADJAC";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  if (s == "P1") return Family::P1;
  if (s == "P2") return Family::P2;
  if (s == "P3") return Family::P3;
  if (s == "ROSEN-EQ") return Family::RosenEq;
  if (s == "DEBUG-BADJAC") return Family::DebugBadJacobian;
  throw ConfigError("unknown problem family '" + s + "'");
}

struct KktPair {
  Vector x;
  Vector lambda;
};

struct TestProblemSpec {
  Family family = Family::P2;
  std::size_t n = 2;
  double sigma = 0.1;
  double a = 2.0;             // P1 cosine amplitude
  std::optional<Vector> x0;   // overrides the family's starting point
  bool first_order = true;
  bool zeroth_order = true;
};

struct TestProblem {
  ConstrainedProblem problem;
  std::optional<KktPair> known_solution;
};

namespace detail {

// Minimum over t of a smooth 1-D function with a single-variable derivative,
// by a grid scan on [lo, hi] and Newton polish.
template <class F, class DF, class D2F>
double scalar_minimum(F f, DF df, D2F d2f, double lo, double hi) {
  const int steps = 20000;
  double best_t = lo, best = f(lo);
  for (int i = 1; i <= steps; ++i) {
    const double t = lo + (hi - lo) * i / steps;
    const double v = f(t);
    if (v < best) {
      best = v;
      best_t = t;
    }
  }
  double t = best_t;
  for (int it = 0; it < 50; ++it) {
    const double h = d2f(t);
    if (!(h > 0.0)) break;
    const double next = t - df(t) / h;
    if (std::abs(next - t) < 1e-15) {
      t = next;
      break;
    }
    t = next;
  }
  return std::min(best, f(t));
}

inline std::shared_ptr<ConstraintMap> zero_constraint(std::size_t n) {
  return std::make_shared<ConstraintMap>(n, 1, [](const Vector&, Vector& c, Matrix& J) {
    c.setZero();
    J.setZero();
  });
}

inline void attach_oracle(ConstrainedProblem& p, const TestProblemSpec& spec, ExactObjective f) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) throw ConfigError("sigma must be finite and >= 0");
  p.true_objective = std::make_shared<ExactObjective>(f);
  p.oracle = std::make_shared<GaussianNoiseOracle>(std::move(f), p.n, spec.sigma, spec.first_order, spec.zeroth_order);
  p.constants.sigma = spec.sigma;
}

inline Vector box_vector(std::size_t n, double v) { return Vector::Constant(static_cast<Eigen::Index>(n), v); }

// Nonconvex separable objective sum 0.5 x_i^2 + a cos x_i, no constraints.
inline TestProblem build_p1(const TestProblemSpec& spec) {
  const double a = spec.a;
  if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("P1 parameter a must be finite and >= 0");
  const std::size_t n = spec.n;
  TestProblem tp;
  ConstrainedProblem& p = tp.problem;
  p.name = "P1";
  p.n = n;
  p.q = 1;
  p.constraints = zero_constraint(n);
  ExactObjective f;
  f.value = [a](const Vector& x) { return 0.5 * x.squaredNorm() + a * x.array().cos().sum(); };
  f.gradient = [a](const Vector& x) -> Vector { return x.array() - a * x.array().sin(); };
  attach_oracle(p, spec, std::move(f));
  const double per_coord = scalar_minimum([a](double t) { return 0.5 * t * t + a * std::cos(t); },
                                          [a](double t) { return t - a * std::sin(t); },
                                          [a](double t) { return 1.0 - a * std::cos(t); }, 0.0, a + 1.0);
  const double dn = static_cast<double>(n);
  p.constants.f_low = dn * per_coord;
  p.constants.L_g = 1.0 + a;
  p.constants.L_J = 0.0;
  // Bounds over the box [-3, 3]^n.
  p.constants.kappa_f = dn * (4.5 + a);
  p.constants.kappa_c = 0.0;
  p.constants.kappa_J = 0.0;
  p.constants.kappa_g = std::sqrt(dn) * (3.0 + a);
  p.sampling_box = Box{box_vector(n, -3.0), box_vector(n, 3.0)};
  p.x_init = spec.x0 ? *spec.x0 : box_vector(n, 0.5);
  return tp;
}

// 0.5||x - 1||^2 subject to sum(x) = 1; `jacobian_scale` corrupts the
// reported Jacobian for the debug family.
inline TestProblem build_p2(const TestProblemSpec& spec, double jacobian_scale = 1.0) {
  const std::size_t n = spec.n;
  const double dn = static_cast<double>(n);
  TestProblem tp;
  ConstrainedProblem& p = tp.problem;
  p.name = jacobian_scale == 1.0 ? "P2" : "DEBUG-BADJAC";
  p.n = n;
  p.q = 1;
  p.constraints = std::make_shared<ConstraintMap>(n, 1, [jacobian_scale](const Vector& x, Vector& c, Matrix& J) {
    c(0) = x.sum() - 1.0;
    J.setConstant(jacobian_scale);
  });
  ExactObjective f;
  f.value = [](const Vector& x) { return 0.5 * (x.array() - 1.0).square().sum(); };
  f.gradient = [](const Vector& x) -> Vector { return x.array() - 1.0; };
  attach_oracle(p, spec, std::move(f));
  p.constants.f_low = 0.0;
  p.constants.L_g = 1.0;
  p.constants.L_J = 0.0;
  // Bounds over the box [-0.5, 1.5]^n.
  p.constants.kappa_f = 0.5 * dn * 2.25;
  p.constants.kappa_c = std::max(std::abs(-0.5 * dn - 1.0), std::abs(1.5 * dn - 1.0));
  p.constants.kappa_g = 1.5 * std::sqrt(dn);
  p.constants.kappa_J = std::sqrt(dn);
  p.sampling_box = Box{box_vector(n, -0.5), box_vector(n, 1.5)};
  p.x_init = spec.x0 ? *spec.x0 : box_vector(n, 0.0);
  // Stationarity x - 1 + lambda 1 = 0 with sum(x) = 1.
  const double lam = (dn - 1.0) / dn;
  tp.known_solution = KktPair{box_vector(n, 1.0 - lam), Vector::Constant(1, lam)};
  return tp;
}

inline Vector p3_shift(std::size_t n) {
  Vector b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) b(static_cast<Eigen::Index>(i)) = 0.3 * (i % 2 == 0 ? 1.0 : -1.0) / (i + 1.0);
  return b;
}

// KKT point of sum(x^4/4 - x^2/2) + b'x on the unit sphere: projected
// gradient descent on the sphere from 2n coordinate starts, best value kept,
// then Newton on the KKT system.
inline KktPair p3_reference(const Vector& b) {
  const Eigen::Index n = b.size();
  auto fval = [&](const Vector& x) { return (0.25 * x.array().pow(4) - 0.5 * x.array().square()).sum() + b.dot(x); };
  auto grad = [&](const Vector& x) -> Vector { return (x.array().cube() - x.array()).matrix() + b; };
  Vector best;
  double best_val = std::numeric_limits<double>::infinity();
  for (Eigen::Index s = 0; s < 2 * n; ++s) {
    Vector x = Vector::Constant(n, 0.1);
    x(s / 2) = s % 2 == 0 ? 1.0 : -1.0;
    x.normalize();
    for (int it = 0; it < 20000; ++it) {
      const Vector g = grad(x);
      const Vector rg = g - g.dot(x) * x;
      if (rg.norm() < 1e-13) break;
      x = (x - 0.1 * rg).normalized();
    }
    const double v = fval(x);
    if (v < best_val) {
      best_val = v;
      best = x;
    }
  }
  double lam = -grad(best).dot(best) / 2.0;
  for (int it = 0; it < 50; ++it) {
    Vector r(n + 1);
    r.head(n) = grad(best) + 2.0 * lam * best;
    r(n) = best.squaredNorm() - 1.0;
    if (r.norm() < 1e-14) break;
    Matrix K = Matrix::Zero(n + 1, n + 1);
    K.topLeftCorner(n, n) = (3.0 * best.array().square() - 1.0 + 2.0 * lam).matrix().asDiagonal();
    K.block(0, n, n, 1) = 2.0 * best;
    K.block(n, 0, 1, n) = 2.0 * best.transpose();
    const Vector d = K.fullPivLu().solve(-r);
    best += d.head(n);
    lam += d(n);
  }
  return {best, Vector::Constant(1, lam)};
}

// Nonconvex quartic on the unit sphere.
inline TestProblem build_p3(const TestProblemSpec& spec) {
  const std::size_t n = spec.n;
  const double dn = static_cast<double>(n);
  const Vector b = p3_shift(n);
  TestProblem tp;
  ConstrainedProblem& p = tp.problem;
  p.name = "P3";
  p.n = n;
  p.q = 1;
  p.constraints = std::make_shared<ConstraintMap>(n, 1, [](const Vector& x, Vector& c, Matrix& J) {
    c(0) = x.squaredNorm() - 1.0;
    J.row(0) = 2.0 * x.transpose();
  });
  ExactObjective f;
  f.value = [b](const Vector& x) { return (0.25 * x.array().pow(4) - 0.5 * x.array().square()).sum() + b.dot(x); };
  f.gradient = [b](const Vector& x) -> Vector { return (x.array().cube() - x.array()).matrix() + b; };
  attach_oracle(p, spec, std::move(f));
  double f_low = 0.0;
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const double bi = b(i);
    f_low += scalar_minimum([bi](double t) { return 0.25 * t * t * t * t - 0.5 * t * t + bi * t; },
                            [bi](double t) { return t * t * t - t + bi; }, [](double t) { return 3.0 * t * t - 1.0; },
                            -3.0, 3.0);
  }
  p.constants.f_low = f_low;
  // Bounds over the box [-2, 2]^n.
  p.constants.L_g = 11.0;
  p.constants.L_J = 2.0;
  p.constants.kappa_f = 2.0 * dn + 2.0 * b.lpNorm<1>();
  p.constants.kappa_c = 4.0 * dn - 1.0;
  p.constants.kappa_g = (b.array().abs() + 6.0).matrix().norm();
  p.constants.kappa_J = 4.0 * std::sqrt(dn);
  p.sampling_box = Box{box_vector(n, -2.0), box_vector(n, 2.0)};
  Vector x0 = Vector::Zero(static_cast<Eigen::Index>(n));
  x0(0) = 0.8;
  p.x_init = spec.x0 ? *spec.x0 : x0;
  tp.known_solution = p3_reference(b);
  return tp;
}

// Chained Rosenbrock with x_1 + x_2 = 1; constants estimated on [-1.5, 1.5]^n.
inline TestProblem build_rosen(const TestProblemSpec& spec) {
  const std::size_t n = spec.n;
  if (n < 2) throw ConfigError("ROSEN-EQ needs n >= 2");
  TestProblem tp;
  ConstrainedProblem& p = tp.problem;
  p.name = "ROSEN-EQ";
  p.n = n;
  p.q = 1;
  p.constraints = std::make_shared<ConstraintMap>(n, 1, [](const Vector& x, Vector& c, Matrix& J) {
    c(0) = x(0) + x(1) - 1.0;
    J.setZero();
    J(0, 0) = 1.0;
    J(0, 1) = 1.0;
  });
  ExactObjective f;
  f.value = [](const Vector& x) {
    double s = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i)
      s += 100.0 * std::pow(x(i + 1) - x(i) * x(i), 2) + std::pow(1.0 - x(i), 2);
    return s;
  };
  f.gradient = [](const Vector& x) -> Vector {
    Vector g = Vector::Zero(x.size());
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
      const double d = x(i + 1) - x(i) * x(i);
      g(i) += -400.0 * x(i) * d - 2.0 * (1.0 - x(i));
      g(i + 1) += 200.0 * d;
    }
    return g;
  };
  attach_oracle(p, spec, std::move(f));
  p.constants.f_low = 0.0;
  p.sampling_box = Box{box_vector(n, -1.5), box_vector(n, 1.5)};
  p.constants = estimate_constants(p, 2000, RandomStream(0x5EC0));
  p.x_init = spec.x0 ? *spec.x0 : box_vector(n, 0.0);
  return tp;
}

}  // namespace detail

inline TestProblem build_problem(const TestProblemSpec& spec) {
  if (spec.n == 0) throw ConfigError("n must be >= 1");
  if (spec.x0 && spec.x0->size() != static_cast<Eigen::Index>(spec.n)) throw ConfigError("x0 must have length n");
  switch (spec.family) {
    case Family::P1: return detail::build_p1(spec);
    case Family::P2: return detail::build_p2(spec);
    case Family::P3: return detail::build_p3(spec);
    case Family::RosenEq: return detail::build_rosen(spec);
    case Family::DebugBadJacobian: return detail::build_p2(spec, 1.5);
  }
  throw ConfigError("unknown problem family");
}

}  // namespace spen
