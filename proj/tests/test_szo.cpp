#include "spen/szo_solver.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "spen/problems.hpp"

using namespace spen;

namespace {

ConstrainedProblem linear_problem(const Vector& a, double sigma = 0.0) {
  ConstrainedProblem p;
  p.name = "linear";
  p.n = static_cast<std::size_t>(a.size());
  p.q = 1;
  ExactObjective f;
  f.value = [a](const Vector& x) { return a.dot(x); };
  f.gradient = [a](const Vector&) -> Vector { return a; };
  p.true_objective = std::make_shared<ExactObjective>(f);
  p.oracle = std::make_shared<GaussianNoiseOracle>(f, p.n, sigma);
  p.constraints = std::make_shared<ConstraintMap>(p.n, 1, [](const Vector&, Vector& c, Matrix& J) {
    c.setZero();
    J.setZero();
  });
  p.constants.sigma = sigma;
  p.x_init = Vector::Zero(a.size());
  return p;
}

}  // namespace

TEST(SzoBudget, UnitConstants) {
  const auto b = szo_budget(1.0, 1.0, 1.0, 1.0, 1, 1.0, 0.0, 1.0, 1.0);
  EXPECT_EQ(b.n_bar, 19080u);
  EXPECT_EQ(b.m, 139u);
  ASSERT_TRUE(b.mu.has_value());
  EXPECT_DOUBLE_EQ(*b.mu, 1.0 / std::sqrt(19080.0));
  EXPECT_DOUBLE_EQ(b.gamma, 1.0);
}

TEST(SzoBudget, GrowsWithDimensionAndInverseEpsilon) {
  const auto base = szo_budget(0.5, 1.0, 1.0, 1.0, 2, 1.0, 0.1, 1.0, 1.0);
  EXPECT_GT(szo_budget(0.5, 1.0, 1.0, 1.0, 4, 1.0, 0.1, 1.0, 1.0).n_bar, base.n_bar);
  const auto half = szo_budget(0.25, 1.0, 1.0, 1.0, 2, 1.0, 0.1, 1.0, 1.0);
  EXPECT_NEAR(static_cast<double>(half.n_bar) / static_cast<double>(base.n_bar), 4.0, 0.1);
}

TEST(SzoEstimator, LinearObjectiveIsParallelToDirection) {
  const Vector a = (Vector(3) << 1.0, -2.0, 0.5).finished();
  const auto p = linear_problem(a);
  for (int i = 0; i < 50; ++i) {
    const auto s = gaussian_gradient_sample(p, Vector::Zero(3), 0.1, RandomStream(2).child(i));
    EXPECT_LE((s.g_mu - a.dot(s.v) * s.v).norm(), 1e-9 * (1.0 + s.g_mu.norm()));
  }
}

TEST(SzoEstimator, ConstantObjectiveGivesZero) {
  const auto p = linear_problem(Vector::Zero(2), 0.3);
  for (int i = 0; i < 20; ++i)
    EXPECT_EQ(gaussian_gradient_sample(p, Vector::Ones(2), 0.05, RandomStream(4).child(i)).g_mu.norm(), 0.0);
}

TEST(SzoEstimator, DirectionReproducibleAndTwoCalls) {
  const auto p = linear_problem(Vector::Ones(2), 0.1);
  OracleLedger ledger;
  const auto s1 = gaussian_gradient_sample(p, Vector::Zero(2), 0.1, RandomStream(8), &ledger);
  const auto s2 = gaussian_gradient_sample(p, Vector::Zero(2), 0.1, RandomStream(8));
  EXPECT_EQ(s1.v, s2.v);
  EXPECT_EQ(s1.g_mu, s2.g_mu);
  EXPECT_EQ(ledger.szo_calls, 2u);
  EXPECT_EQ(ledger.sfo_calls, 0u);
}

TEST(SzoEstimator, MeanMatchesLinearGradient) {
  const Vector a = (Vector(2) << 0.7, -1.3).finished();
  const auto p = linear_problem(a);
  const int draws = 100000;
  Vector mean = Vector::Zero(2), sq = Vector::Zero(2);
  for (int i = 0; i < draws; ++i) {
    const Vector g = gaussian_gradient_sample(p, Vector::Ones(2), 0.01, RandomStream(11).child(i)).g_mu;
    mean += g;
    sq += g.cwiseProduct(g);
  }
  mean /= draws;
  const Vector se = ((sq / draws - mean.cwiseProduct(mean)) / draws).cwiseSqrt();
  for (int j = 0; j < 2; ++j) EXPECT_LE(std::abs(mean(j) - a(j)), 4.0 * se(j));
}

TEST(SmoothedReference, QuadraticShiftsByMuSquaredN) {
  auto w = [](const Vector& x) { return 0.5 * x.squaredNorm(); };
  const Vector x = (Vector(2) << 0.3, -0.4).finished();
  const auto r = smoothed_reference(w, x, 0.1, 20000, RandomStream(3));
  EXPECT_LE(std::abs(r.mean - (w(x) + 0.01)), 4.0 * r.std_error);
}

TEST(SmoothedReference, LinearUnchanged) {
  auto w = [](const Vector& x) { return 2.0 * x(0) - x(1); };
  const Vector x = (Vector(2) << 1.0, 2.0).finished();
  const auto r = smoothed_reference(w, x, 0.2, 20000, RandomStream(6));
  EXPECT_LE(std::abs(r.mean - w(x)), 4.0 * r.std_error);
}

TEST(SolveSzo, LinearStepPointsDownhill) {
  const Vector a = (Vector(2) << 1.0, 2.0).finished();
  const auto p = linear_problem(a);
  SolverBudget b;
  b.n_bar = 40;
  b.m = 20;
  b.L = 1.0;
  b.gamma = 1.0;
  b.mu = 1e-3;
  NscoOptions opt;
  opt.forced_stop = 2;
  Vector mean_step = Vector::Zero(2);
  for (int r = 0; r < 100; ++r) {
    const auto res = solve_nsco_szo(p, 1.0, p.x_init, b, RandomStream(21).child(r), opt);
    EXPECT_EQ(res.oracle_calls, 2u * 2u * b.m);
    mean_step += res.x_R - p.x_init;
  }
  const double cosang = mean_step.dot(-a) / (mean_step.norm() * a.norm());
  EXPECT_GE(cosang, std::cos(5.0 * M_PI / 180.0));
}

TEST(SolveSzo, CallAccountingMatchesOracleCounter) {
  const auto tp = build_problem({Family::P1, 2, 0.1});
  const auto& p = tp.problem;
  SolverBudget b;
  b.n_bar = 4000;
  b.m = 40;
  b.L = 3.0;
  b.gamma = 1.0 / 3.0;
  b.mu = 0.01;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    p.oracle->reset_invocation_count();
    const auto r = solve_nsco_szo(p, 1.0, p.x_init, b, RandomStream(seed));
    EXPECT_EQ(r.oracle_calls, p.oracle->invocation_count());
    EXPECT_EQ(r.oracle_calls, 2 * r.R * b.m);
  }
}

TEST(SolveSzo, NeedsSmoothingAndZerothOrder) {
  const auto p = linear_problem(Vector::Ones(2));
  SolverBudget b;
  EXPECT_THROW(solve_nsco_szo(p, 1.0, p.x_init, b, RandomStream(1)), ConfigError);
  TestProblemSpec spec{Family::P2, 2, 0.1};
  spec.zeroth_order = false;
  const auto tp = build_problem(spec);
  b.mu = 0.1;
  EXPECT_THROW(solve_nsco_szo(tp.problem, 1.0, tp.problem.x_init, b, RandomStream(1)), OracleKindError);
}
