#pragma once

// Reference minimizers by exhaustive grid search. They share no code with
// the subsolvers in prox.hpp and serve as independent checks.

#include <cmath>
#include <functional>
#include <vector>

#include "spen/core.hpp"

namespace spen {

// Minimum of a convex function over the ball ||z - center|| <= radius by
// grid search on a cube of (2k+1)^n points, zooming around the best point.
// Points outside the ball are projected onto it; each level halves the
// window. Iterates until the grid spacing drops below `final_spacing`
// (1e-3 or finer).
struct GridMinimum {
  Vector argmin;
  double value;
};

inline GridMinimum grid_minimize(const std::function<double(const Vector&)>& f, const Vector& center, double radius,
                                 double final_spacing = 1e-7, int k = 10) {
  const Eigen::Index n = center.size();
  GridMinimum best{center, f(center)};
  if (radius <= 0.0 || n == 0) return best;
  Vector window_center = center;
  double half_width = radius;
  std::vector<int> idx(static_cast<std::size_t>(n));
  Vector z(n);
  while (true) {
    const double h = half_width / k;
    std::fill(idx.begin(), idx.end(), -k);
    Vector level_best = best.argmin;
    double level_val = best.value;
    while (true) {
      for (Eigen::Index i = 0; i < n; ++i) z(i) = window_center(i) + h * idx[static_cast<std::size_t>(i)];
      const Vector off = z - center;
      const double on = off.norm();
      if (on > radius) z = center + off * (radius / on);
      const double v = f(z);
      if (v < level_val) {
        level_val = v;
        level_best = z;
      }
      std::size_t d = 0;
      while (d < idx.size() && ++idx[d] > k) idx[d++] = -k;
      if (d == idx.size()) break;
    }
    best = {level_best, level_val};
    if (h <= final_spacing) break;
    window_center = level_best;
    half_width = 0.5 * k * h;
  }
  return best;
}

// Prox objective psi(d) = <g,d> + rho||c + J d|| + ||d||^2/(2 gamma); its
// minimizer lies within gamma(||g|| + rho||J||) of the origin. The grid
// cannot land on the kink c + J d = 0, so a second candidate comes from a 1-D
// grid over t in ||v|| = min_t (||v||^2/t + t)/2, where each fixed t is a
// linear solve. Both candidates are scored with psi itself.
inline GridMinimum brute_force_prox(const Vector& g, const Vector& c, const Matrix& J, double rho, double gamma) {
  auto psi = [&](const Vector& d) { return g.dot(d) + rho * (c + J * d).norm() + d.squaredNorm() / (2.0 * gamma); };
  const double normJ = J.size() ? J.operatorNorm() : 0.0;
  const double radius = gamma * (g.norm() + rho * normJ) + 1e-12;
  GridMinimum best = grid_minimize(psi, Vector::Zero(g.size()), radius);
  if (rho > 0.0 && J.size()) {
    const Eigen::Index n = g.size();
    auto d_of = [&](double t) -> Vector {
      const Matrix A = Matrix::Identity(n, n) / gamma + (rho / t) * J.transpose() * J;
      return A.ldlt().solve(-(g + (rho / t) * J.transpose() * c));
    };
    auto along = [&](const Vector& u) { return psi(d_of(std::exp(u(0)))); };
    const GridMinimum path = grid_minimize(along, Vector::Constant(1, -10.0), 30.0, 1e-9, 50);
    if (path.value < best.value) best = {d_of(std::exp(path.argmin(0))), path.value};
  }
  return best;
}

inline double brute_force_theta(const Vector& c, const Matrix& J) {
  auto r = [&](const Vector& s) { return (c + J * s).norm(); };
  return c.norm() - grid_minimize(r, Vector::Zero(J.cols()), 1.0).value;
}

inline double brute_force_phi(const Vector& G, const Vector& c, const Matrix& J, double rho) {
  auto v = [&](const Vector& s) { return G.dot(s) + rho * (c + J * s).norm(); };
  return rho * c.norm() - grid_minimize(v, Vector::Zero(J.cols()), 1.0).value;
}

// Central-difference Jacobian.
inline Matrix central_difference_jacobian(const std::function<Vector(const Vector&)>& c, const Vector& x,
                                          double h = 1e-6) {
  const Vector c0 = c(x);
  Matrix J(c0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vector xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = (c(xp) - c(xm)) / (2.0 * h);
  }
  return J;
}

}  // namespace spen
