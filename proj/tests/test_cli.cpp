#include "spen/cli.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace spen;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  const std::string path = ::testing::TempDir() + "spen_cli_" + name;
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

const char* kP2 = "[problem]\nfamily = P2\nsigma = 0.1\n[penalty]\nepsilon = 0.1\n";

}  // namespace

TEST(Cli, SolveTwiceIsByteIdentical) {
  const auto cfg = write_temp("p2.ini", kP2);
  const auto a = ::testing::TempDir() + "spen_cli_a.csv";
  const auto b = ::testing::TempDir() + "spen_cli_b.csv";
  const auto r1 = run({"solve", "--config", cfg, "--seed", "42", "--out", a});
  const auto r2 = run({"solve", "--config", cfg, "--seed", "42", "--out", b});
  ASSERT_EQ(r1.code, 0) << r1.err;
  ASSERT_EQ(r2.code, 0) << r2.err;
  EXPECT_EQ(r1.out, r2.out);
  EXPECT_FALSE(slurp(a).empty());
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(r1.out.find("rho_N"), std::string::npos);
  EXPECT_NE(r1.out.find("oracle calls"), std::string::npos);
  const auto r3 = run({"solve", "--config", cfg, "--seed", "43", "--out", b});
  EXPECT_NE(slurp(a), slurp(b));
}

TEST(Cli, CertifyP2WritesCsvAndExitsZero) {
  const auto cfg = write_temp("p2c.ini", kP2);
  const auto out = ::testing::TempDir() + "spen_cli_cert.csv";
  std::remove(out.c_str());
  const auto r = run({"certify", "--config", cfg, "--seed", "42", "--out", out});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("verdict        true"), std::string::npos) << r.out;
  const auto recs = read_records(out);
  EXPECT_EQ(recs.size(), 100u * 5u);
}

TEST(Cli, ValidateNamesTheBrokenJacobian) {
  const auto good = write_temp("good.ini", kP2);
  EXPECT_EQ(run({"validate", "--config", good}).code, 0);
  const auto bad = write_temp("bad.ini", "[problem]\nfamily = DEBUG-BADJAC\n[penalty]\nepsilon = 0.1\n");
  const auto r = run({"validate", "--config", bad});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL finite-difference Jacobian"), std::string::npos) << r.out;
  EXPECT_NE(r.err.find("finite-difference Jacobian"), std::string::npos) << r.err;
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto bad = write_temp("xi.ini", "[problem]\nfamily = P2\n[penalty]\nepsilon = 0.1\nxi = 1.5\n");
  const auto r = run({"solve", "--config", bad});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("xi must lie in (0,1)"), std::string::npos);
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(run({"solve", "--config", "/nonexistent.ini"}).code, 2);
  EXPECT_EQ(run({"solve"}).code, 2);
  EXPECT_EQ(run({"frobnicate", "--config", bad}).code, 2);
  EXPECT_EQ(run({}).code, 2);
}

TEST(Cli, VerdictFalseExitsOne) {
  // max_outer = 1 solves no subproblem, so the infeasible start is returned
  const auto cfg = write_temp("short.ini",
                              "[problem]\nfamily = P2\nsigma = 0.1\nx0 = 5, 5\n[penalty]\nepsilon = 0.01\n"
                              "max_outer = 1\n[run]\nreplications = 30\n");
  const auto r = run({"certify", "--config", cfg});
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("verdict        false"), std::string::npos);
}

TEST(Cli, SweepPrintsSlope) {
  const auto cfg = write_temp("sweep.ini",
                              "[problem]\nfamily = P2\nsigma = 0.1\n[penalty]\nepsilon = 0.4\nmax_outer = 3\n"
                              "[run]\nreplications = 30\nepsilons = 0.8, 0.6, 0.4\n");
  const auto out = ::testing::TempDir() + "spen_cli_sweep.csv";
  const auto r = run({"sweep", "--config", cfg, "--out", out});
  EXPECT_NE(r.out.find("slope"), std::string::npos) << r.out << r.err;
  const auto recs = read_records(out);
  EXPECT_EQ(recs.size(), 3u * 30u * 3u);
  EXPECT_EQ(recs.back().replication, 89u);
}
