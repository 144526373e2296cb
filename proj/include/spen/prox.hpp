#pragma once

// Convex subproblems behind the penalty method, all specialised to the
// penalty term h = rho * ||.||_2:
//   prox_step   x+ = argmin_u <g,u-x> + rho||c + J(u-x)|| + ||u-x||^2/(2 gamma)
//   theta       ||c|| - min_{||s||<=1} ||c + J s||
//   phi         rho||c|| - min_{||s||<=1} { <G,s> + rho||c + J s|| }

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "spen/ball_quadratic.hpp"
#include "spen/core.hpp"

namespace spen {

struct SubsolverOptions {
  double tol = 1e-8;
  std::size_t max_iter = 100000;
  bool exact_finish = true;  // eigen-based polish or fallback after the iterative phase
};

inline constexpr double kProxTol = 1e-10;
inline constexpr double kBallTol = 1e-8;

struct ProxResult {
  Vector x_plus;
  Vector step;     // x_plus - x
  Vector lambda;   // dual multiplier, ||lambda|| <= rho
  Vector p_gamma;  // (x - x_plus) / gamma
  double gap = 0.0;
  std::size_t iterations = 0;
};

struct BallSubproblemResult {
  Vector s_star;
  double value = 0.0;    // inner minimum value at s_star
  double measure = 0.0;  // theta or phi, clamped at 0
  double gap = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

// Smallest gap a certificate can resolve for terms of magnitude `scale`.
inline double rounding_floor(double scale) { return 1e-10 * std::max(1.0, scale); }

inline Vector project_ball(const Vector& v, double radius) {
  const double nv = v.norm();
  if (nv <= radius || nv == 0.0) return v;
  return v * (radius / nv);
}

inline double largest_eigenvalue(const Matrix& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric, Eigen::EigenvaluesOnly);
  return std::max(0.0, eig.eigenvalues().maxCoeff());
}

inline void check_shapes(const Vector& g, const Vector& c, const Matrix& J, const char* who) {
  if (J.rows() != c.size() || J.cols() != g.size())
    throw ConfigError(std::string(who) + ": inconsistent dimensions (J is " + std::to_string(J.rows()) + "x" +
                      std::to_string(J.cols()) + ", c has " + std::to_string(c.size()) + ", g has " +
                      std::to_string(g.size()) + ")");
}

// Prox objective and its dual, evaluated at a dual point lambda.
struct ProxDual {
  const Vector& g;
  const Vector& c;
  const Matrix& J;
  double rho, gamma;

  Vector step(const Vector& lambda) const { return -gamma * (g + J.transpose() * lambda); }
  double primal(const Vector& d) const {
    return g.dot(d) + rho * (c + J * d).norm() + d.squaredNorm() / (2.0 * gamma);
  }
  double dual(const Vector& lambda) const {
    return lambda.dot(c) - 0.5 * gamma * (g + J.transpose() * lambda).squaredNorm();
  }
  double gap(const Vector& lambda) const { return std::max(0.0, primal(step(lambda)) - dual(lambda)); }
};

}  // namespace detail

// Prox-linear step through its q-dimensional dual
//   max_{||lambda||<=rho} <lambda,c> - (gamma/2)||g + J'lambda||^2,
// solved by accelerated projected gradient with function-value restarts and
// finished with an exact eigen-based solve of the same ball quadratic.
// The primal step is d = -gamma (g + J'lambda).
inline ProxResult prox_step(const Vector& x, const Vector& g, const Vector& c, const Matrix& J, double rho,
                            double gamma, SubsolverOptions opt = {kProxTol, 100000}) {
  detail::check_shapes(g, c, J, "prox_step");
  if (x.size() != g.size()) throw ConfigError("prox_step: x and g differ in length");
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw ConfigError("prox_step: rho must be >= 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("prox_step: gamma must be > 0");
  if (!(opt.tol > 0.0)) throw ConfigError("prox_step: tol must be > 0");

  const detail::ProxDual dual{g, c, J, rho, gamma};
  const Eigen::Index q = c.size();
  const Matrix H = gamma * J * J.transpose();
  const Vector b = c - gamma * (J * g);
  const double L = detail::largest_eigenvalue(H);

  Vector lambda = Vector::Zero(q);
  double gap = dual.gap(lambda);
  std::size_t iters = 0;

  if (gap > opt.tol && q > 0 && rho > 0.0) {
    if (L == 0.0) {
      // J = 0: the dual is linear, maximised on the ball boundary along c.
      lambda = c.norm() > 0.0 ? Vector(c * (rho / c.norm())) : Vector::Zero(q);
    } else {
      Vector y = lambda, prev = lambda;
      double t = 1.0;
      double fprev = std::numeric_limits<double>::infinity();
      double best_gap = gap;
      std::size_t stalled = 0, accepted = 0;
      for (iters = 1; iters <= opt.max_iter; ++iters) {
        const Vector grad = H * y - b;
        Vector next = detail::project_ball(y - grad / L, rho);
        const double fnext = 0.5 * next.dot(H * next) - b.dot(next);
        if (fnext > fprev && y != lambda) {  // restart momentum
          t = 1.0;
          y = lambda;
          continue;
        }
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        prev = lambda;
        lambda = next;
        y = lambda + ((t - 1.0) / tn) * (lambda - prev);
        t = tn;
        fprev = std::min(fprev, fnext);
        if (++accepted % 16 == 0) {
          const double gk = dual.gap(lambda);
          if (gk <= opt.tol) break;
          // no progress over many checks: hand over to the exact finish
          if (gk < 0.5 * best_gap) {
            best_gap = gk;
            stalled = 0;
          } else if (opt.exact_finish && ++stalled >= 64) {
            break;
          }
        }
      }
    }
    gap = dual.gap(lambda);
    if (opt.exact_finish) {
      // Keep whichever dual point certifies the smaller gap.
      const Vector polished = solve_ball_quadratic(H, b, rho).z;
      const double gap_pol = dual.gap(polished);
      if (gap_pol <= gap) {
        lambda = polished;
        gap = gap_pol;
      }
    }
  }
  if (!(gap <= opt.tol)) {
    const double scale = rho * c.norm() + std::pow(std::sqrt(gamma) * g.norm() + rho * std::sqrt(L), 2);
    if (!(gap <= std::max(opt.tol, detail::rounding_floor(scale))))
      throw SubsolverError("prox_step: dual solve did not converge", gap);
  }

  ProxResult out;
  out.step = dual.step(lambda);
  out.x_plus = x + out.step;
  out.p_gamma = (x - out.x_plus) / gamma;
  out.lambda = std::move(lambda);
  out.gap = gap;
  out.iterations = iters;
  return out;
}

inline Vector generalized_gradient(const Vector& x, const Vector& g, const Vector& c, const Matrix& J, double rho,
                                   double gamma, SubsolverOptions opt = {kProxTol, 100000}) {
  return prox_step(x, g, c, J, rho, gamma, opt).p_gamma;
}

namespace detail {

// Certified gap for min_{||s||<=1} ||c + J s|| at s, using the dual
// max_{||y||<=1} <y,c> - ||J'y|| evaluated at y = r/||r|| and y = 0.
inline double residual_norm_gap(const Vector& c, const Matrix& J, const Vector& s) {
  const Vector r = c + J * s;
  const double rn = r.norm();
  if (rn == 0.0) return 0.0;
  const Vector y = r / rn;
  const double lower = std::max(0.0, y.dot(c) - (J.transpose() * y).norm());
  return std::max(0.0, rn - lower);
}

}  // namespace detail

// Infeasibility measure. The inner problem is solved on 0.5||c + J s||^2 by
// projected gradient with Barzilai-Borwein steps (falling back to the fixed
// step 1/||J'J|| when the nonmonotone test fails), then finished exactly.
inline BallSubproblemResult theta(const Vector& c, const Matrix& J, SubsolverOptions opt = {kBallTol, 100000}) {
  if (J.rows() != c.size()) throw ConfigError("theta: J and c disagree in row count");
  if (!(opt.tol > 0.0)) throw ConfigError("theta: tol must be > 0");
  const Eigen::Index n = J.cols();
  const double cn = c.norm();
  BallSubproblemResult out;
  out.s_star = Vector::Zero(n);
  out.value = cn;
  out.gap = detail::residual_norm_gap(c, J, out.s_star);

  if (out.gap > opt.tol && n > 0) {
    const Matrix JtJ = J.transpose() * J;
    const Vector Jtc = J.transpose() * c;
    const double L = detail::largest_eigenvalue(JtJ);
    auto f = [&](const Vector& s) { return 0.5 * (c + J * s).squaredNorm(); };
    auto grad = [&](const Vector& s) -> Vector { return JtJ * s + Jtc; };

    Vector s = Vector::Zero(n);
    Vector gs = grad(s);
    double alpha = L > 0.0 ? 1.0 / L : 1.0;
    bool fixed_step = false;
    std::deque<double> recent{f(s)};
    constexpr std::size_t kMemory = 10;
    std::size_t it = 1;
    for (; it <= opt.max_iter; ++it) {
      Vector next = detail::project_ball(s - alpha * gs, 1.0);
      double fnext = f(next);
      if (!fixed_step && fnext > *std::max_element(recent.begin(), recent.end())) {
        fixed_step = true;
        alpha = 1.0 / L;
        next = detail::project_ball(s - alpha * gs, 1.0);
        fnext = f(next);
      }
      const Vector gnext = grad(next);
      if (!fixed_step) {
        const Vector ds = next - s, dg = gnext - gs;
        const double sy = ds.dot(dg);
        alpha = sy > 0.0 ? ds.squaredNorm() / sy : 1.0 / L;
        if (!std::isfinite(alpha) || alpha <= 0.0) alpha = 1.0 / L;
      }
      s = std::move(next);
      gs = gnext;
      recent.push_back(fnext);
      if (recent.size() > kMemory) recent.pop_front();
      if (it % 8 == 0 && detail::residual_norm_gap(c, J, s) <= opt.tol) break;
    }
    const double gap_pg = detail::residual_norm_gap(c, J, s);
    Vector best = s;
    double best_gap = gap_pg;
    if (opt.exact_finish) {
      Vector polished = solve_ball_quadratic(JtJ, -Jtc, 1.0).z;
      const double gap_pol = detail::residual_norm_gap(c, J, polished);
      if (gap_pol <= gap_pg) {
        best = std::move(polished);
        best_gap = gap_pol;
      }
    }
    const double best_val = (c + J * best).norm();
    if (best_val <= out.value) {
      out.s_star = best;
      out.value = best_val;
      out.gap = best_gap;
    }
    out.iterations = std::min(it, opt.max_iter);
    if (!(out.gap <= std::max(opt.tol, detail::rounding_floor(cn + std::sqrt(L)))))
      throw SubsolverError("theta: ball least-squares solve did not converge", out.gap);
  }
  out.measure = std::max(0.0, cn - out.value);
  return out;
}

namespace detail {

struct PhiProblem {
  const Vector& G;
  const Vector& c;
  const Matrix& J;
  double rho;

  double primal(const Vector& s) const { return G.dot(s) + rho * (c + J * s).norm(); }
  double dual(const Vector& y) const { return y.dot(c) - (G + J.transpose() * y).norm(); }
  Vector best_dual(const Vector& s) const {
    const Vector r = c + J * s;
    const double rn = r.norm();
    return rn > 0.0 ? Vector(r * (rho / rn)) : Vector::Zero(r.size());
  }
  Vector best_primal(const Vector& y) const {
    const Vector w = G + J.transpose() * y;
    const double wn = w.norm();
    return wn > 0.0 ? Vector(-w / wn) : Vector::Zero(w.size());
  }
};

// Exact route for the steering problem. With ||v|| = min_{t>0} (||v||^2/t + t)/2
// both the primal (v = c + Js) and the dual (v = G + J'y) become, for fixed t,
// ball-constrained quadratics solved exactly; the optimal values are convex
// in t and are optimized over log t by golden section. Every candidate is
// passed to `consider(s, y)`.
template <class Objective>
void golden_section_log(double log_hi, Objective&& f) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = log_hi - 75.0, b = log_hi;
  double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 160 && b - a > 1e-12; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    }
  }
  f(a);
}

template <class Consider>
void phi_by_quadratic_penalty(const PhiProblem& pb, Consider&& consider) {
  const Matrix& J = pb.J;
  Eigen::SelfAdjointEigenSolver<Matrix> primal_eig(J.transpose() * J);
  Eigen::SelfAdjointEigenSolver<Matrix> dual_eig(J * J.transpose());
  const double normJ = std::sqrt(std::max(0.0, primal_eig.eigenvalues().maxCoeff()));
  const Vector Jtc = J.transpose() * pb.c;
  const Vector JG = J * pb.G;

  // min_s <G,s> + rho||c+Js||^2/(2t) + rho t/2
  golden_section_log(std::log(pb.c.norm() + normJ + 1e-300), [&](double log_t) {
    const double t = std::exp(log_t);
    const double w = pb.rho / t;
    const Vector s = solve_ball_quadratic_eig(w * primal_eig.eigenvalues(), primal_eig.eigenvectors(),
                                              -pb.G - w * Jtc, 1.0)
                         .z;
    const Vector r = pb.c + J * s;
    Vector y = w * r;
    if (y.norm() > pb.rho) y *= pb.rho / y.norm();
    consider(s, y);
    return pb.G.dot(s) + 0.5 * w * r.squaredNorm() + 0.5 * pb.rho * t;
  });
  // max_y <c,y> - ||G+J'y||^2/(2t) - t/2, written as a minimization.
  golden_section_log(std::log(pb.G.norm() + pb.rho * normJ + 1e-300), [&](double log_t) {
    const double t = std::exp(log_t);
    const double w = 1.0 / t;
    const Vector y = solve_ball_quadratic_eig(w * dual_eig.eigenvalues(), dual_eig.eigenvectors(),
                                              pb.c - w * JG, pb.rho)
                         .z;
    const Vector v = pb.G + J.transpose() * y;
    Vector s = -w * v;
    if (s.norm() > 1.0) s /= s.norm();
    consider(s, y);
    return -(pb.c.dot(y) - 0.5 * w * v.squaredNorm() - 0.5 * t);
  });
}

}  // namespace detail

// Steering measure. The inner problem is the saddle point
//   min_{||s||<=1} max_{||y||<=rho} <G,s> + <y, c + J s>,
// solved by a primal-dual hybrid gradient scheme with steps tau = sigma =
// 0.99/||J|| and restarts to the running average. Bounds are tracked through
// best responses so the reported gap is a certificate. If the gap is still
// open at the iteration cap, an exact quadratic-penalty solve takes over.
inline BallSubproblemResult phi(const Vector& G, const Vector& c, const Matrix& J, double rho,
                                SubsolverOptions opt = {kBallTol, 100000}) {
  detail::check_shapes(G, c, J, "phi");
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw ConfigError("phi: rho must be >= 0");
  if (!(opt.tol > 0.0)) throw ConfigError("phi: tol must be > 0");
  const Eigen::Index n = J.cols(), q = J.rows();
  const detail::PhiProblem pb{G, c, J, rho};
  const double base = rho * c.norm();

  BallSubproblemResult out;
  Vector best_s = pb.best_primal(Vector::Zero(q));
  double upper = pb.primal(best_s);
  if (pb.primal(Vector::Zero(n)) < upper) {
    best_s = Vector::Zero(n);
    upper = pb.primal(best_s);
  }
  double lower = pb.dual(pb.best_dual(best_s));
  lower = std::max(lower, pb.dual(Vector::Zero(q)));

  auto consider_s = [&](const Vector& s) {
    const double v = pb.primal(s);
    if (v < upper) {
      upper = v;
      best_s = s;
    }
    lower = std::max(lower, pb.dual(pb.best_dual(s)));
  };
  auto consider_y = [&](const Vector& y) {
    lower = std::max(lower, pb.dual(y));
    const Vector s = pb.best_primal(y);
    const double v = pb.primal(s);
    if (v < upper) {
      upper = v;
      best_s = s;
    }
  };

  std::size_t it = 0;
  const double normJ = std::sqrt(detail::largest_eigenvalue(J.transpose() * J));
  if (upper - lower > opt.tol && normJ > 0.0 && rho > 0.0) {
    const double step = 0.99 / normJ;
    Vector s = best_s, y = pb.best_dual(best_s);
    Vector s_sum = Vector::Zero(n), y_sum = Vector::Zero(q);
    std::size_t since_restart = 0;
    double gap_at_restart = upper - lower;
    for (it = 1; it <= opt.max_iter; ++it) {
      const Vector s_new = detail::project_ball(s - step * (G + J.transpose() * y), 1.0);
      const Vector s_bar = 2.0 * s_new - s;
      y = detail::project_ball(y + step * (c + J * s_bar), rho);
      s = s_new;
      s_sum += s;
      y_sum += y;
      ++since_restart;
      if (it % 32 == 0) {
        const Vector s_avg = s_sum / static_cast<double>(since_restart);
        const Vector y_avg = y_sum / static_cast<double>(since_restart);
        consider_s(s);
        consider_y(y);
        consider_s(s_avg);
        consider_y(y_avg);
        const double gap = upper - lower;
        if (gap <= opt.tol) break;
        if (gap <= 0.5 * gap_at_restart) {
          s = best_s;
          y = pb.best_dual(best_s);
          s_sum.setZero();
          y_sum.setZero();
          since_restart = 0;
          gap_at_restart = gap;
        }
      }
    }
    if (opt.exact_finish && upper - lower > opt.tol) {
      detail::phi_by_quadratic_penalty(pb, [&](const Vector& s_c, const Vector& y_c) {
        consider_s(s_c);
        consider_y(y_c);
      });
    }
  } else if (normJ == 0.0 || rho == 0.0) {
    // Separable: min <G,s> over the ball, plus the constant rho||c||.
    best_s = pb.best_primal(Vector::Zero(q));
    upper = pb.primal(best_s);
    lower = upper;
  }

  out.s_star = best_s;
  out.value = upper;
  out.gap = std::max(0.0, upper - lower);
  out.iterations = std::min(it, opt.max_iter);
  if (!(out.gap <= std::max(opt.tol, detail::rounding_floor(base + rho * normJ + G.norm()))))
    throw SubsolverError("phi: primal-dual solve did not converge", out.gap);
  out.measure = std::max(0.0, base - out.value);
  return out;
}

}  // namespace spen
