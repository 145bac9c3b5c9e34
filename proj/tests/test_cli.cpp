#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "jungle/cli.hpp"

using namespace jungle;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "jungle");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) { return testing::TempDir() + "jungle_cli_" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, SolveDandelionPrintsRisk) {
  const Result r = run_cli({"solve", "dandelion", "--n", "800", "--p", "0.028", "--rho", "0.08", "--risk", "0.99"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find("VaR 0.11\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("modes 2"), std::string::npos) << r.out;
  EXPECT_EQ(r.out.find("loss_count"), std::string::npos);
}

TEST(Cli, SolveMatchesLibraryByteForByte) {
  const Result r = run_cli({"solve", "binomial", "--n", "10", "--p", "0.028"});
  ASSERT_EQ(r.code, 0);
  std::ostringstream lib;
  write_pmf_csv(lib, binomial_pmf(10, 0.028));
  EXPECT_EQ(r.out, lib.str());

  const std::string path = temp_path("diamond.csv");
  ASSERT_EQ(run_cli({"solve", "diamond", "--n", "20", "--alpha", "-1", "--beta", "0.1", "--out", path}).code, 0);
  std::ostringstream d;
  write_pmf_csv(d, diamond_pmf({20, -1.0, 0.1}));
  EXPECT_EQ(slurp(path), d.str());

  const Result risk = run_cli({"risk", "--pmf", path, "--confidence", "0.99"});
  ASSERT_EQ(risk.code, 0) << risk.err;
  std::ifstream pmf_in(path);
  const RiskReport expected = risk_report(read_pmf_csv(pmf_in), 0.99);
  EXPECT_EQ(json::parse(risk.out)["var_count"].get<std::size_t>(), expected.var_count);
}

TEST(Cli, CalibrateDiamondJson) {
  const Result r = run_cli({"calibrate", "diamond", "--n", "20", "--p", "0.4", "--rho", "0.3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  const auto lib = calibrate_diamond({20, 0.4, 0.3});
  EXPECT_EQ(j["alpha"].get<double>(), lib.params.alpha);
  EXPECT_EQ(j["beta"].get<double>(), lib.params.beta);
}

TEST(Cli, ScanReportsCriticalPoint) {
  const std::string summary = temp_path("scan.json");
  const Result r = run_cli({"scan", "diamond", "--n", "80", "--alpha", "-6:2:64", "--beta", "0:0.2:64",
                            "--summary", summary, "--out", temp_path("scan.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("critical point"), std::string::npos);
  const json j = json::parse(slurp(summary));
  EXPECT_NEAR(j["critical_point"]["alpha"].get<double>(), -2.0, 0.3);

  const Result t = run_cli({"scan", "transition", "--n", "50", "--p", "0.028"});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_GT(json::parse(t.out)["var_ratio"].get<double>(), 3.0);
}

TEST(Cli, EnsembleAndHistogram) {
  const Result e = run_cli({"ensemble", "diamond", "--n", "20", "--p", "0.4", "--rho", "0.2", "--drho", "0.1",
                            "--samples", "6", "--seed", "3", "--stress", "shock:1:0.05:0.05"});
  ASSERT_EQ(e.code, 0) << e.err;
  const json j = json::parse(e.out);
  EXPECT_EQ(j["family"], "diamond");

  const Result g = run_cli({"histogram", "--generate", "caa-c", "--seed", "2"});
  ASSERT_EQ(g.code, 0) << g.err;
  std::istringstream in(g.out);
  EXPECT_EQ(parse_series(in), synthetic_series(caa_c_fixture(2)));
}

TEST(Cli, ExitCodes) {
  // Infeasible targets and bad usage exit 1.
  EXPECT_EQ(run_cli({"calibrate", "dandelion", "--n", "10", "--p", "0.01", "--p0", "0.5", "--rho", "0.9"}).code,
            cli::kExitInvalid);
  EXPECT_EQ(run_cli({"solve", "diamond", "--n", "20"}).code, cli::kExitInvalid);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitInvalid);
  EXPECT_EQ(run_cli({"scan", "diamond", "--n", "20", "--alpha", "-1:1:8"}).code, cli::kExitInvalid);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);

  // Feasible targets with an iteration cap too small to converge exit 2.
  const std::string spec = temp_path("spec.json");
  {
    std::ofstream f(spec);
    PortfolioSpec s = make_dandelion_spec(6, 0.05, 0.05, 0.6);
    s.p[3] = 0.07;
    f << to_json(s).dump();
  }
  const Result r = run_cli({"calibrate", "general", "--config", spec, "--mode", "exact", "--max-iter", "1",
                            "--tol", "1e-14"});
  EXPECT_EQ(r.code, cli::kExitNoConvergence) << r.err;
  EXPECT_NE(r.err.find("best residual"), std::string::npos);
}

TEST(Cli, SampleWritesStatesAndSummary) {
  const std::string states = temp_path("states.bin");
  const std::string summary = temp_path("summary.json");
  const Result r = run_cli({"sample", "diamond", "--n", "12", "--alpha", "-1", "--beta", "0.1", "--chains", "2",
                            "--draws", "100", "--burn-in", "10", "--thin", "1", "--seed", "5", "--states", states,
                            "--summary", summary, "--out", temp_path("samples.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(states, std::ios::binary);
  EXPECT_EQ(read_states_binary(in).size(), 200u);
  EXPECT_TRUE(json::parse(slurp(summary)).contains("split_rhat") ||
              json::parse(slurp(summary)).contains("diagnostics"));
}
