#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "mmatch/cli.hpp"
#include "test_util.hpp"

using namespace mmatch;
using namespace mmatch::testing;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
  io::json report() const { return io::json::parse(out); }
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mmatch_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string json_file(const std::string& name) { return data_path("json/" + name + ".json"); }

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("mmatch_cli_test_" + name)).string();
}

}  // namespace

TEST(Cli, SolveSkillsMarketWithOracle) {
  const auto r = run({"solve", "--market", json_file("skills_market"), "--output", json_file("skills_output"),
                      "--oracle", "--oracle-units", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.report();
  EXPECT_EQ(j["spec_version"], "1.0");
  EXPECT_EQ(j["command"], "solve");
  EXPECT_EQ(j["oracle"]["optimal_plans"], 1);
  EXPECT_TRUE(j["oracle"]["solver_plan_optimal"].get<bool>());
  EXPECT_EQ(io::matching_from_json(j["matching"]), load_matching("skills_optimal"));
}

TEST(Cli, OutputIsDeterministic) {
  const std::vector<std::string> args{"solve", "--market", json_file("twin_market"), "--output",
                                      json_file("identity_output")};
  EXPECT_EQ(run(args).out, run(args).out);
  EXPECT_EQ(run(args).report()["value"], 1000.0);
}

TEST(Cli, SortCheckReportsVerdictsAndExistence) {
  const auto r = run({"sort-check", "--matching", json_file("scheme1"), "--market", json_file("cross_market"),
                      "--pattern", json_file("pattern_diag")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.report();
  EXPECT_FALSE(j["weak"]["holds"].get<bool>());
  EXPECT_EQ(j["global_sorting_exists"]["status"], "does_not_exist");
}

TEST(Cli, DominanceOnCrossMarket) {
  const auto r = run({"dominance", "--matching", json_file("cross_first"), "--other", json_file("cross_second"),
                      "--pattern", json_file("pattern_diag")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.report();
  EXPECT_FALSE(j["dominates"].get<bool>());
  EXPECT_TRUE(j["certificate"].contains("separating_q"));
  EXPECT_TRUE(j["undominance"]["undominated"].get<bool>());
}

TEST(Cli, IpfBinaryMarket) {
  const auto r = run({"ipf", "--market", json_file("binary_market"), "--output", json_file("binary_output"),
                      "--pattern", json_file("pattern_diag")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.report();
  EXPECT_TRUE(j["log_pn_modular"].get<bool>());
  const auto d = io::matching_from_json(j["density"]);
  EXPECT_NEAR(d.mass({0, 1}, {0, 0}), 0.2739, 5e-4);
}

TEST(Cli, GammaFromTable) {
  const auto r = run({"gamma", "--table", data_path("tables/table14_2010.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(r.report()["table"]["gamma"].get<double>(), 0.7586, 0.02);
}

TEST(Cli, SimulateThenEstimateAndGamma) {
  const auto csv = temp_path("couples.csv");
  const auto s = run({"simulate", "--n", "3000", "--seed", "5", "--women", data_path("tables/table10_2010.csv"),
                      "--men", data_path("tables/table11_2010.csv"), "--out", csv});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(s.report()["records"], 3000);
  const auto g = run({"gamma", "--couples", csv});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_GT(g.report()["gammas"]["W,M H,H"]["gamma"].get<double>(), 0.3);
  const auto e = run({"estimate", "--couples", csv, "--method", "ascent"});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NEAR(e.report()["params"]["theta"]["HH"].get<double>(), 0.7625, 0.3);
  std::remove(csv.c_str());
}

TEST(Cli, DiagnosticsArithmetic) {
  const auto r = run({"diagnostics", "--kl", "0.3952", "--entropy", "7.837"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(r.report()["efficiency_loss_percent"].get<double>(), 4.8, 0.05);
}

TEST(Cli, TextFormatAndOutFile) {
  const auto path = temp_path("report.txt");
  const auto r = run({"--format", "text", "--out", path, "diagnostics", "--kl", "1", "--entropy", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const auto text = io::read_file(path);
  EXPECT_NE(text.find("efficiency_loss_percent"), std::string::npos);
  EXPECT_NE(text.find("25"), std::string::npos);
  std::remove(path.c_str());
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"bogus"}).code, 1);
  EXPECT_EQ(run({"solve", "--market", json_file("skills_market")}).code, 1);
  EXPECT_EQ(run({"solve", "--market", "/nonexistent.json", "--output", json_file("skills_output")}).code, 2);
  EXPECT_EQ(run({"diagnostics"}).code, 1);
  EXPECT_EQ(run({"diagnostics", "--kl", "0", "--entropy", "0"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, ExecutableRuns) {
  const std::string cmd = std::string(MMATCH_CLI_PATH) + " diagnostics --kl 0.3952 --entropy 7.837 > /dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
}
