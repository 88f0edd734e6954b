#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <sys/wait.h>

using namespace twm;
using namespace twm::test;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(TWM_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) r.out += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string cfg(const std::string& name) { return source_path("configs/" + name); }

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("twm_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Cli, AlgebraCheck) {
  const Result ok = run("algebra check --config " + cfg("su2xsu2_equivariant.json"));
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("torsion_witness"), std::string::npos);
  EXPECT_NE(ok.out.find("lambda_max"), std::string::npos);
  const Result bad = run("algebra check --config " + cfg("su2xsu2_noninvariant.json"));
  EXPECT_NE(bad.code, 0) << bad.out;
  EXPECT_NE(bad.out.find("p_invariance"), std::string::npos);
}

TEST(Cli, InvarianceGateExitsWithOne) {
  const fs::path out = temp_dir("gate");
  const Result r = run("simulate --config " + cfg("su2xsu2_noninvariant.json") + " --out " + out.string());
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("not ad_R-invariant"), std::string::npos);
  fs::remove_all(out);
}

TEST(Cli, LambdaGateAndOverride) {
  const fs::path out = temp_dir("lambda");
  const std::string env = "TWM_COUPLING__LAMBDA=3.0 TWM_RUN__T=0.05 ";
  const std::string base = std::string(TWM_CLI_PATH) + " simulate --config " + cfg("su2_reconstruct.json") +
                           " --out " + out.string();
  EXPECT_EQ(WEXITSTATUS(std::system((env + base + " > /dev/null 2>&1").c_str())), 1);
  EXPECT_EQ(WEXITSTATUS(std::system((env + base + " --allow-large-lambda > /dev/null 2>&1").c_str())), 0);
  fs::remove_all(out);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("simulate").code, 1);
  EXPECT_EQ(run("simulate --config /nonexistent.json --out /tmp/x").code, 1);
  EXPECT_EQ(run("convergence --config " + cfg("abelian_exact.json") + " --levels 2").code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, SimulateAnalyzeReconstruct) {
  const fs::path out = temp_dir("pipeline"), rec = temp_dir("pipeline_rec");
  const Result s = run("simulate --config " + cfg("su2_reconstruct.json") + " --out " + out.string());
  ASSERT_EQ(s.code, 0) << s.out;
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
  const Result a = run("analyze --run " + out.string());
  EXPECT_EQ(a.code, 0) << a.out;
  EXPECT_NE(a.out.find("consistent: yes"), std::string::npos) << a.out;
  EXPECT_TRUE(fs::exists(out / "analysis.ndjson"));
  const Result r = run("reconstruct --run " + out.string() + " --out " + rec.string());
  EXPECT_EQ(r.code, 0) << r.out;
  const json rep = json::parse(std::ifstream(rec / "reconstruction_report.ndjson"));
  EXPECT_LE(rep["unitarity_drift"].get<double>(), 1e-8);
  EXPECT_EQ(rep["status"], "ok");
  EXPECT_FALSE(list_snapshots(rec, "group_field_").empty());
  fs::remove_all(out);
  fs::remove_all(rec);
}

TEST(Cli, WavemapRunAndConvergence) {
  const fs::path out = temp_dir("wave");
  const Result s = run("simulate --formulation wavemap --config " + cfg("wavemap_su2_exponential.json") + " --out " +
                       out.string());
  EXPECT_EQ(s.code, 0) << s.out;
  const Result c = run("convergence --config " + cfg("abelian_exact.json") + " --levels 3");
  EXPECT_EQ(c.code, 0) << c.out;
  EXPECT_NE(c.out.find("solution_error_vs_exact"), std::string::npos);
  fs::remove_all(out);
}
