#include "spen/config.hpp"

#include <gtest/gtest.h>

using namespace spen;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseConfig, MinimalConfigGetsDefaults) {
  const auto c = parse_config("[problem]\nfamily = P2\n[penalty]\nepsilon = 0.1\n");
  EXPECT_EQ(c.problem.family, Family::P2);
  EXPECT_EQ(c.penalty.epsilon, 0.1);
  EXPECT_EQ(c.penalty.xi, 0.5);
  EXPECT_EQ(c.penalty.tau, 1.0);
  EXPECT_EQ(c.penalty.rho0, 1.0);
  EXPECT_EQ(c.penalty.d_tilde, 1.0);
  EXPECT_EQ(c.penalty.d1_tilde, 1.0);
  EXPECT_EQ(c.penalty.d2_tilde, 1.0);
  EXPECT_EQ(c.replications, 100u);
  EXPECT_FALSE(c.subcommand.has_value());
  EXPECT_FALSE(c.output.has_value());
}

TEST(ParseConfig, FullConfig) {
  const auto c = parse_config(R"(# experiment
[problem]
family = P3
n = 3
sigma = 0.25   # noise
x0 = 1, 0, -0.5
zeroth_order = false
[penalty]
epsilon = 0.2
xi = 0.3
tau = 2
rho0 = 1.5
max_outer = 7
mode = szo
early_stop = false
d_tilde = 2
[run]
command = sweep
replications = 40
seed = 123
output = out/run.csv
threads = 2
epsilons = 0.4, 0.2, 0.1, 0.05
timing = true
)");
  EXPECT_EQ(c.problem.family, Family::P3);
  EXPECT_EQ(c.problem.n, 3u);
  EXPECT_EQ(c.problem.sigma, 0.25);
  ASSERT_TRUE(c.problem.x0);
  EXPECT_EQ((*c.problem.x0)(2), -0.5);
  EXPECT_FALSE(c.problem.zeroth_order);
  EXPECT_EQ(c.penalty.mode, OracleMode::szo);
  EXPECT_EQ(c.penalty.max_outer, 7u);
  EXPECT_FALSE(c.penalty.early_stop);
  EXPECT_EQ(c.subcommand, Subcommand::sweep);
  EXPECT_EQ(c.seed, 123u);
  EXPECT_EQ(*c.output, "out/run.csv");
  EXPECT_EQ(c.sweep_epsilons.size(), 4u);
  EXPECT_TRUE(c.record_timing);
}

TEST(ParseConfig, XiOutOfRange) {
  const auto msg = error_of("[problem]\nfamily = P2\n[penalty]\nepsilon = 0.1\nxi = 1.5\n");
  EXPECT_NE(msg.find("xi must lie in (0,1)"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 5"), std::string::npos) << msg;
  EXPECT_NE(msg.find("penalty.xi"), std::string::npos) << msg;
}

TEST(ParseConfig, ErrorsCarryContext) {
  EXPECT_NE(error_of("[problem]\nfamily = P2\ncolour = red\n[penalty]\nepsilon = 0.1\n").find("line 3, field 'problem.colour': unknown key"),
            std::string::npos);
  EXPECT_NE(error_of("[penalty]\nepsilon = 0.1\n").find("missing required field 'problem.family'"), std::string::npos);
  EXPECT_NE(error_of("[problem]\nfamily = P2\n").find("missing required field 'penalty.epsilon'"), std::string::npos);
  EXPECT_NE(error_of("[problem]\nfamily = Q\n[penalty]\nepsilon = 0.1\n").find("unknown problem family"),
            std::string::npos);
  EXPECT_NE(error_of("[problem]\nfamily = P2\n[penalty]\nepsilon = abc\n").find("expected a finite number"),
            std::string::npos);
  EXPECT_NE(error_of("[problem]\nfamily = P2\nfamily = P1\n[penalty]\nepsilon = 0.1\n").find("duplicate key"),
            std::string::npos);
  EXPECT_NE(error_of("[solver]\n").find("unknown section"), std::string::npos);
  EXPECT_NE(error_of("family = P2\n").find("before any section"), std::string::npos);
  EXPECT_NE(error_of("[problem]\nfamily P2\n").find("expected key = value"), std::string::npos);
  EXPECT_NE(error_of("[problem]\nfamily = P2\n[penalty]\nepsilon = 0.1\n[run]\nreplications = 10\n").find(">= 30"),
            std::string::npos);
  EXPECT_NE(error_of("[problem]\nfamily = P2\nn = 3\nx0 = 1, 2\n[penalty]\nepsilon = 0.1\n").find("does not match n"),
            std::string::npos);
  for (const char* bad : {"epsilon = 1.0", "epsilon = 0", "epsilon = 0.1\ntau = 0", "epsilon = 0.1\nrho0 = 0.5",
                          "epsilon = 0.1\nmode = xyz", "epsilon = 0.1\nmax_outer = 0", "epsilon = 0.1\nd2_tilde = -1"})
    EXPECT_FALSE(error_of(std::string("[problem]\nfamily = P2\n[penalty]\n") + bad + "\n").empty()) << bad;
}

TEST(ParseConfig, RoundTrip) {
  const std::vector<std::string> texts{
      "[problem]\nfamily = P2\n[penalty]\nepsilon = 0.1\n",
      "[problem]\nfamily = P1\nn = 4\nsigma = 0.1234567890123\na = 1.7\nx0 = 0.1,0.2,0.3,1e-17\n[penalty]\n"
      "epsilon = 0.3333333333333333\nmode = szo\nearly_stop = false\n[run]\ncommand = certify\nseed = "
      "18446744073709551615\noutput = a b.csv\nepsilons = 0.5, 0.25, 0.125\n",
  };
  for (const auto& t : texts) {
    const auto c = parse_config(t);
    const auto text = serialize(c);
    const auto again = parse_config(text);
    EXPECT_TRUE(again == c) << text;
    EXPECT_EQ(serialize(again), text);
  }
}
