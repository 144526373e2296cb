#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "spen/core.hpp"

namespace spen {

// Minimizer of  0.5 z'Hz - b'z  subject to ||z|| <= radius  for symmetric
// positive semidefinite H, computed from an eigendecomposition of H and the
// secular equation ||(H + nu I)^{-1} b|| = radius.
struct BallQuadraticSolution {
  Vector z;
  double nu = 0.0;  // multiplier of the ball constraint
};

// Same problem with H = Q diag(lam) Q' given by its eigendecomposition.
inline BallQuadraticSolution solve_ball_quadratic_eig(const Vector& eigenvalues, const Matrix& Q, const Vector& b,
                                                      double radius) {
  const Eigen::Index k = b.size();
  BallQuadraticSolution out;
  out.z = Vector::Zero(k);
  if (k == 0 || radius <= 0.0) return out;

  const Vector lam = eigenvalues.cwiseMax(0.0);
  const Vector beta = Q.transpose() * b;
  const double lam_max = lam.maxCoeff();
  const double zero_eig = 1e-13 * std::max(1.0, lam_max);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return out;

  // Interior candidate: nu = 0 with b in the range of H.
  bool in_range = true;
  double norm2 = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (lam(i) <= zero_eig) {
      if (std::abs(beta(i)) > 1e-13 * bnorm) in_range = false;
    } else {
      norm2 += beta(i) * beta(i) / (lam(i) * lam(i));
    }
  }
  if (in_range && norm2 <= radius * radius) {
    Vector w(k);
    for (Eigen::Index i = 0; i < k; ++i) w(i) = lam(i) <= zero_eig ? 0.0 : beta(i) / lam(i);
    out.z = Q * w;
    return out;
  }

  // Boundary solution: find nu > 0 with ||w(nu)|| = radius, w_i = beta_i/(lam_i+nu).
  auto wnorm = [&](double nu) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const double t = beta(i) / (lam(i) + nu);
      s += t * t;
    }
    return std::sqrt(s);
  };
  // ||w(nu)|| <= ||b||/nu, so nu = ||b||/radius brackets the root from above.
  double lo = 0.0, hi = bnorm / radius;
  double nu = hi;
  // Newton on 1/||w|| - 1/radius (nearly linear in nu), safeguarded by bisection.
  for (int it = 0; it < 200; ++it) {
    const double wn = wnorm(nu);
    if (wn > radius) lo = nu; else hi = nu;
    double d = 0.0;  // d||w||/dnu
    for (Eigen::Index i = 0; i < k; ++i) {
      const double den = lam(i) + nu;
      d -= beta(i) * beta(i) / (den * den * den);
    }
    d /= std::max(wn, std::numeric_limits<double>::min());
    double next = nu;
    if (d < 0.0 && wn > 0.0) next = nu - (1.0 / wn - 1.0 / radius) / (-d / (wn * wn));
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - nu) <= 1e-15 * std::max(1.0, nu) || hi - lo <= 1e-15 * std::max(1.0, hi)) {
      nu = next;
      break;
    }
    nu = next;
  }
  Vector w(k);
  for (Eigen::Index i = 0; i < k; ++i) w(i) = beta(i) / (lam(i) + nu);
  const double wn = w.norm();
  if (wn > radius && wn > 0.0) w *= radius / wn;
  out.z = Q * w;
  out.nu = nu;
  return out;
}

inline BallQuadraticSolution solve_ball_quadratic(const Matrix& H, const Vector& b, double radius) {
  if (b.size() == 0 || radius <= 0.0) return {Vector::Zero(b.size()), 0.0};
  Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
  return solve_ball_quadratic_eig(eig.eigenvalues(), eig.eigenvectors(), b, radius);
}

}  // namespace spen
