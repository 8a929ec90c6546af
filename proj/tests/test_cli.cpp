#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "peerfx/figures.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
CliRun cli(const std::string& args) {
  const std::string cmd = std::string("\"") + PEERFX_CLI + "\" " + args + " 2>&1";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t got;
  while ((got = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("peerfx_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

bool contains(const std::string& s, const std::string& needle) {
  return s.find(needle) != std::string::npos;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cli("--help").code, 0);
  EXPECT_NE(cli("").code, 0);
  EXPECT_NE(cli("frobnicate").code, 0);
  EXPECT_NE(cli("reproduce-figure 9").code, 0);
}

TEST(Cli, PrintConfigMatchesBuiltIn) {
  const CliRun r = cli("reproduce-figure 4 --print-config");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, peerfx::figure_config(4));
}

TEST(Cli, RunIsDeterministic) {
  const fs::path d = scratch("run");
  {
    std::ofstream f(d / "c.ini");
    f << "[experiment]\nname = t\nreplications = 5\nseed = 3\n[grid]\nvalues = 100, 150\n"
         "[ensemble]\nkind = erdos_renyi\ndegree = 5\n";
  }
  const CliRun a = cli("run " + (d / "c.ini").string() + " --output " + (d / "a").string());
  const CliRun b = cli("run " + (d / "c.ini").string() + " --output " + (d / "b").string() +
                    " --threads 3 --plot");
  ASSERT_EQ(a.code, 0) << a.out;
  ASSERT_EQ(b.code, 0) << b.out;
  for (const char* f : {"results.csv", "summary.csv", "estimates.csv"})
    EXPECT_EQ(slurp(d / "a" / f), slurp(d / "b" / f)) << f;
  EXPECT_TRUE(fs::exists(d / "b" / "t_rho.svg"));
  EXPECT_TRUE(fs::exists(d / "b" / "t_delta.svg"));
  fs::remove_all(d);
}

TEST(Cli, ConfigErrorsExitWithLine) {
  const fs::path d = scratch("badcfg");
  {
    std::ofstream f(d / "c.ini");
    f << "[experiment]\nreplicatons = 5\n";
  }
  const CliRun r = cli("run " + (d / "c.ini").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.out, "c.ini:")) << r.out;
  EXPECT_EQ(cli("run /nonexistent/x.ini").code, 2);
  fs::remove_all(d);
}

TEST(Cli, GraphThenDiagnose) {
  const fs::path d = scratch("graph");
  const CliRun g = cli("graph --ensemble clique_union --n 60 --degree 5 --output " + (d / "g.txt").string());
  ASSERT_EQ(g.code, 0) << g.out;
  const CliRun r = cli("diagnose --graph " + (d / "g.txt").string() + " --moments");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(contains(r.out, "c3_d_over_c4 = 1\n")) << r.out;
  EXPECT_TRUE(contains(r.out, "few_triangles = violated"));
  EXPECT_TRUE(contains(r.out, "degree_regularity = holds"));
  EXPECT_TRUE(contains(r.out, "norm_G_sq = 12\n"));
  EXPECT_TRUE(contains(r.out, "m_I_GS = "));
  {
    std::ofstream f(d / "bad.txt");
    f << "n 3\n0 1\n2 2\n";
  }
  const CliRun bad = cli("diagnose --graph " + (d / "bad.txt").string());
  EXPECT_EQ(bad.code, 2);
  EXPECT_TRUE(contains(bad.out, "line 3")) << bad.out;
  fs::remove_all(d);
}

TEST(Cli, DiagnoseEnsemble) {
  const CliRun r = cli("diagnose --ensemble erdos_renyi --n 2000 --degree 45 --seed 1");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(contains(r.out, "few_triangles = borderline")) << r.out;
  EXPECT_EQ(cli("diagnose --n 10").code, 2);
}

TEST(Cli, IdentifyExamples) {
  const CliRun a = cli("identify --example disconnected");
  ASSERT_EQ(a.code, 0);
  EXPECT_TRUE(contains(a.out, "identified: no"));
  EXPECT_TRUE(contains(a.out, "witness: orthogonal-eigenvector"));
  EXPECT_TRUE(contains(a.out, "orthogonal eigenvector: 0 1 -1"));
  const CliRun b = cli("identify --example rounded --perturb 0.01 --trials 200");
  ASSERT_EQ(b.code, 0);
  EXPECT_TRUE(contains(b.out, "identified: no"));
  EXPECT_TRUE(contains(b.out, "identified after perturbation: "));
  const CliRun c = cli("identify --P \"0.9 0.3 0.1; 0.3 0.6 0.2; 0.1 0.2 0.4\" --relevance --csv");
  ASSERT_EQ(c.code, 0);
  EXPECT_EQ(c.out.substr(0, c.out.find('\n')), "identified,witness,min_gram_eig,kappa");
  EXPECT_TRUE(contains(c.out, "\n1,none,"));
  const CliRun g = cli("identify --graphon constant");
  EXPECT_TRUE(contains(g.out, "witness: dependent-degree-codegree"));
  EXPECT_EQ(cli("identify --graphon spiral").code, 2);
  EXPECT_EQ(cli("identify").code, 2);
}

TEST(Cli, PlotFromSummary) {
  const fs::path d = scratch("plot");
  {
    std::ofstream f(d / "summary.csv");
    f << "n,d,estimator,param,reps_ok,failures,unstable,mean,sd,se,lo,hi\n"
         "100,10,ols_lim,rho,5,0,0,0.1,0.01,0.004,0.08,0.12\n";
  }
  const CliRun r = cli("plot " + (d / "summary.csv").string() + " --output " + (d / "p").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(d / "p_rho.svg"));
  EXPECT_EQ(cli("plot " + (d / "missing.csv").string() + " --output x").code, 2);
  fs::remove_all(d);
}
