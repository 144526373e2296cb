#include "spen/harness.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>

using namespace spen;

namespace {

std::string temp_path(const std::string& name) { return ::testing::TempDir() + "spen_" + name; }

RunRecord random_record(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1e3, 1e3);
  std::uniform_int_distribution<std::uint64_t> I(0, 1u << 30);
  RunRecord r;
  r.replication = I(rng) % 50;
  r.outer_iter = I(rng);
  r.rho = std::exp(U(rng) / 50.0);
  r.theta = std::abs(U(rng)) * 1e-7;
  r.phi = U(rng);
  r.crit_sq = rng() % 4 == 0 ? std::numeric_limits<double>::quiet_NaN() : std::abs(U(rng));
  r.oracle_calls = I(rng) * 1000;
  r.wall_ms = rng() % 2 ? 0.0 : std::abs(U(rng));
  return r;
}

}  // namespace

TEST(MonteCarlo, ConstantRunHasZeroSpread) {
  const auto r = monte_carlo({"c"}, [](std::size_t, const RandomStream&) { return std::vector<double>{2.5}; }, 40, 1);
  EXPECT_EQ(r["c"].mean, 2.5);
  EXPECT_EQ(r["c"].std_error, 0.0);
  EXPECT_EQ(r["c"].ci95_low, 2.5);
  EXPECT_EQ(r["c"].ci95_high, 2.5);
  EXPECT_EQ(r["c"].count, 40u);
  EXPECT_FALSE(r.partial);
}

TEST(MonteCarlo, StandardNormalMean) {
  auto run = [](std::size_t, const RandomStream& s) {
    auto eng = s.engine();
    return std::vector<double>{std::normal_distribution<double>()(eng)};
  };
  const auto r = monte_carlo({"z"}, run, 10000, 17);
  EXPECT_LE(std::abs(r["z"].mean), 4.0 / 100.0);
  EXPECT_NEAR(r["z"].std_error, 0.01, 0.001);
  EXPECT_NEAR(r["z"].ci95_high - r["z"].ci95_low, 2.0 * 1.96 * r["z"].std_error, 1e-15);
}

TEST(MonteCarlo, OrderAndThreadsLeaveEstimatesUnchanged) {
  auto run = [](std::size_t rep, const RandomStream& s) {
    auto eng = s.engine();
    std::normal_distribution<double> N;
    return std::vector<double>{N(eng), N(eng) * N(eng) + static_cast<double>(rep)};
  };
  const auto base = monte_carlo({"a", "b"}, run, 64, 5);
  std::vector<std::size_t> order(64);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), std::mt19937_64(3));
  MonteCarloOptions opt;
  opt.order = order;
  const auto permuted = monte_carlo({"a", "b"}, run, 64, 5, opt);
  opt.threads = 4;
  const auto threaded = monte_carlo({"a", "b"}, run, 64, 5, opt);
  for (const auto* other : {&permuted, &threaded})
    for (const char* name : {"a", "b"}) {
      EXPECT_EQ((*other)[name].mean, base[name].mean);
      EXPECT_EQ((*other)[name].std_error, base[name].std_error);
    }
}

TEST(MonteCarlo, FailuresMarkPartial) {
  auto run = [](std::size_t rep, const RandomStream&) {
    if (rep % 10 == 0) throw DomainError("boom");
    return std::vector<double>{1.0};
  };
  const auto r = monte_carlo({"x"}, run, 100, 1);
  EXPECT_EQ(r.failures, 10u);
  EXPECT_TRUE(r.partial);
  EXPECT_EQ(r["x"].count, 90u);
  EXPECT_EQ(r.replications[0].error, "boom");
  auto rare = [](std::size_t rep, const RandomStream&) {
    if (rep == 3) throw DomainError("once");
    return std::vector<double>{1.0};
  };
  EXPECT_FALSE(monte_carlo({"x"}, rare, 100, 1).partial);
}

TEST(MonteCarlo, RejectsTooFewReplicationsAndBadOrder) {
  auto run = [](std::size_t, const RandomStream&) { return std::vector<double>{0.0}; };
  EXPECT_THROW(monte_carlo({"x"}, run, 29, 1), ConfigError);
  MonteCarloOptions opt;
  opt.order = std::vector<std::size_t>(30, 0);
  EXPECT_THROW(monte_carlo({"x"}, run, 30, 1, opt), ConfigError);
}

TEST(SlopeFit, ExactPowerLaws) {
  std::vector<std::pair<double, double>> a, b;
  for (double e : {0.4, 0.2, 0.1, 0.05}) {
    a.emplace_back(e, 100.0 / (e * e));
    b.emplace_back(e, 7.0 * std::pow(e, -3.5));
  }
  const auto fa = slope_fit(a);
  EXPECT_NEAR(fa.slope, 2.0, 1e-12);
  EXPECT_NEAR(fa.r2, 1.0, 1e-12);
  EXPECT_NEAR(std::exp(fa.intercept), 100.0, 1e-9);
  EXPECT_NEAR(slope_fit(b).slope, 3.5, 1e-12);
}

TEST(SlopeFit, NoisyPowerLaw) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.9, 1.1);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::pair<double, double>> pts;
    for (double e = 0.5; e > 1e-3; e /= 2.0) pts.emplace_back(e, 50.0 * std::pow(e, -2.0) * U(rng));
    EXPECT_NEAR(slope_fit(pts).slope, 2.0, 0.3);
  }
}

TEST(SlopeFit, RejectsBadInput) {
  EXPECT_THROW(slope_fit({{0.1, 1.0}, {0.2, 2.0}}), ConfigError);
  EXPECT_THROW(slope_fit({{0.1, 1.0}, {0.2, 0.0}, {0.3, 1.0}}), ConfigError);
  EXPECT_THROW(slope_fit({{0.1, 1.0}, {0.1, 2.0}, {0.1, 3.0}}), ConfigError);
}

TEST(Csv, EmptyIsHeaderOnly) {
  const auto path = temp_path("empty.csv");
  write_records({}, path);
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  EXPECT_EQ(ss.str(), std::string(kRecordHeader) + "\n");
  EXPECT_TRUE(read_records(path).empty());
}

TEST(Csv, SingleRecordRoundTrip) {
  RunRecord r;
  r.replication = 3;
  r.outer_iter = 2;
  r.rho = 2.5;
  r.theta = 0.125;
  r.phi = 1.0 / 3.0;
  r.oracle_calls = 1234;
  const auto path = temp_path("one.csv");
  write_records({r}, path);
  std::ifstream f(path);
  std::string l1, l2, l3;
  std::getline(f, l1);
  std::getline(f, l2);
  EXPECT_FALSE(static_cast<bool>(std::getline(f, l3)));
  EXPECT_EQ(l2, "3,2,2.5,0.125,0.3333333333333333,,1234,0");
  const auto back = read_records(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], r);
}

TEST(Csv, ThousandRecordsRoundTripInSortedOrder) {
  std::mt19937_64 rng(99);
  std::vector<RunRecord> recs;
  for (int i = 0; i < 1000; ++i) recs.push_back(random_record(rng));
  const auto path = temp_path("many.csv");
  write_records(recs, path);
  const auto back = read_records(path);
  auto sorted = recs;
  std::stable_sort(sorted.begin(), sorted.end(), [](const RunRecord& a, const RunRecord& b) {
    return a.replication != b.replication ? a.replication < b.replication : a.outer_iter < b.outer_iter;
  });
  ASSERT_EQ(back.size(), sorted.size());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back[i], sorted[i]) << "row " << i;
  EXPECT_EQ(format_records(back), format_records(recs));
}

TEST(Csv, ErrorsNameThePath) {
  try {
    write_records({}, "/nonexistent-dir/x.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/x.csv"), std::string::npos);
  }
  EXPECT_THROW(parse_records("a,b\n"), Error);
  EXPECT_THROW(parse_records(std::string(kRecordHeader) + "\n1,2,3\n"), Error);
}

TEST(Problems, P2ClosedFormKkt) {
  const auto tp = build_problem({Family::P2, 2, 0.1});
  ASSERT_TRUE(tp.known_solution);
  EXPECT_NEAR(tp.known_solution->x(0), 0.5, 1e-15);
  EXPECT_NEAR(tp.known_solution->x(1), 0.5, 1e-15);
  EXPECT_NEAR(tp.known_solution->lambda(0), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(*tp.problem.constants.kappa_f, 2.25);
  EXPECT_DOUBLE_EQ(*tp.problem.constants.kappa_c, 2.0);
}

TEST(Problems, KnownSolutionsSatisfyKkt) {
  for (Family f : {Family::P2, Family::P3})
    for (std::size_t n : {1u, 2u, 3u, 5u}) {
      const auto tp = build_problem({f, n, 0.1});
      ASSERT_TRUE(tp.known_solution);
      const auto& ks = *tp.known_solution;
      const auto ev = eval_constraints(tp.problem, ks.x);
      EXPECT_LE((tp.problem.true_objective->gradient(ks.x) + ev.J.transpose() * ks.lambda).norm(), 1e-8)
          << to_string(f) << " n=" << n;
      EXPECT_LE(ev.c.norm(), 1e-8);
    }
}

TEST(Problems, P1NoiselessOracleIsExact) {
  const auto tp = build_problem({Family::P1, 3, 0.0});
  const Vector x = (Vector(3) << 0.1, -2.0, 1.5).finished();
  for (int i = 0; i < 10; ++i)
    EXPECT_EQ(sample_sfo(tp.problem, x, RandomStream(i)).gradient(), tp.problem.true_objective->gradient(x));
  EXPECT_FALSE(tp.known_solution.has_value());
  // f_low is the separable minimum of 0.5 t^2 + 2 cos t, near t = 1.895
  EXPECT_NEAR(tp.problem.constants.f_low / 3.0, 0.5 * 1.895494 * 1.895494 + 2.0 * std::cos(1.895494), 1e-9);
}

TEST(Problems, BuildIsDeterministic) {
  for (Family f : {Family::P1, Family::P2, Family::P3, Family::RosenEq}) {
    const auto a = build_problem({f, 2, 0.2});
    const auto b = build_problem({f, 2, 0.2});
    const Vector x = Vector::Constant(2, 0.3);
    EXPECT_EQ(sample_sfo(a.problem, x, RandomStream(4)).gradient(), sample_sfo(b.problem, x, RandomStream(4)).gradient());
    EXPECT_EQ(sample_szo(a.problem, x, RandomStream(4)).value(), sample_szo(b.problem, x, RandomStream(4)).value());
    EXPECT_EQ(a.problem.constants.L_g, b.problem.constants.L_g);
    EXPECT_EQ(a.problem.constants.kappa_g, b.problem.constants.kappa_g);
  }
}

TEST(Problems, UnknownFamilyAndBadSpec) {
  EXPECT_THROW(parse_family("P9"), ConfigError);
  EXPECT_THROW(build_problem({Family::P2, 0, 0.1}), ConfigError);
  EXPECT_THROW(build_problem({Family::RosenEq, 1, 0.1}), ConfigError);
  TestProblemSpec spec{Family::P2, 2, 0.1};
  spec.x0 = Vector::Zero(3);
  EXPECT_THROW(build_problem(spec), ConfigError);
}

TEST(CertifyAlgorithm, P2SmallRunIsConsistent) {
  const auto tp = build_problem({Family::P2, 2, 0.1});
  PenaltyConfig cfg;
  cfg.epsilon = 0.4;
  const auto a = certify_algorithm(tp.problem, cfg, 30, 8);
  EXPECT_EQ(a.certificate.replications, 30u);
  EXPECT_EQ(a.errors.size(), 0u);
  EXPECT_EQ(a.steering_violations, 0u);
  EXPECT_EQ(a.records.size(), 30u * cfg.max_outer);
  EXPECT_FALSE(a.certificate.bound_theta.has_value());  // L_J = 0
  CertifyOptions opt;
  opt.threads = 3;
  const auto b = certify_algorithm(tp.problem, cfg, 30, 8, opt);
  EXPECT_EQ(a.certificate.crit_sq.mean, b.certificate.crit_sq.mean);
  EXPECT_EQ(a.records, b.records);
}
