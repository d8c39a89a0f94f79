#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef CMVSIM_BIN
#error "CMVSIM_BIN must point at the cmvsim binary"
#endif

namespace {

namespace fs = std::filesystem;

struct CmdResult {
  int status = -1;
  std::string out;  // stdout and stderr interleaved
};

CmdResult run_cmd(const std::string& args) {
  CmdResult r;
  const std::string cmd = std::string(CMVSIM_BIN) + " " + args + " 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  while (true) {
    const std::size_t n = ::fread(buf, 1, sizeof buf, p);
    if (n == 0) break;
    r.out.append(buf, n);
  }
  const int rc = ::pclose(p);
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cmv_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  REQUIRE(f);
  f << text;
}

std::string base_config(const TempDir& tmp) {
  const std::string path = tmp.file("run.cfg");
  write_file(path,
             "model = benchmark\n"
             "T = 0.02\n"
             "delta = 1e-3\n"
             "N_list = 5\n"
             "trials = 1\n"
             "seed = 7\n"
             "out_prefix = " + tmp.file("exp") + "\n");
  return path;
}

}  // namespace

TEST_CASE("--help lists the subcommands and flags") {
  const auto r = run_cmd("--help");
  CHECK(r.status == 0);
  for (const char* word : {"simulate", "experiment", "w1", "plot"})
    CHECK(r.out.find(word) != std::string::npos);

  const auto sim_help = run_cmd("simulate --help");
  CHECK(sim_help.status == 0);
  for (const char* flag : {"--config", "--seed", "--N", "--delta", "--out", "--renormalize"})
    CHECK(sim_help.out.find(flag) != std::string::npos);
  CHECK(run_cmd("experiment --help").out.find("--trials") != std::string::npos);
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(run_cmd("").status == 1);
  CHECK(run_cmd("frobnicate").status == 1);
  CHECK(run_cmd("simulate").status == 1);           // --config required
  CHECK(run_cmd("simulate --config x --N -3").status == 1);
}

TEST_CASE("missing config file exits 1 and names the path") {
  const auto r = run_cmd("simulate --config /no/such/file.cfg");
  CHECK(r.status == 1);
  CHECK(r.out.find("/no/such/file.cfg") != std::string::npos);
}

TEST_CASE("config parse errors exit 1 with a line number") {
  TempDir tmp;
  const std::string path = tmp.file("bad.cfg");
  write_file(path, "model = benchmark\nnonsense = 1\n");
  const auto r = run_cmd("experiment --config " + path);
  CHECK(r.status == 1);
  CHECK(r.out.find("line 2") != std::string::npos);
}

TEST_CASE("w1 of a cloud with itself is zero") {
  TempDir tmp;
  const std::string cloud = tmp.file("cloud.csv");
  write_file(cloud, "weight,x_0\n0.25,1.5\n0.75,-0.5\n");
  const auto r = run_cmd("w1 " + cloud + " " + cloud);
  CHECK(r.status == 0);
  CHECK(r.out == "0\n");
}

TEST_CASE("w1 between shifted diracs prints the shift") {
  TempDir tmp;
  const std::string a = tmp.file("a.csv");
  const std::string b = tmp.file("b.csv");
  write_file(a, "weight,x_0\n1,0\n");
  write_file(b, "weight,x_0\n1,1\n");
  const auto r = run_cmd("w1 " + a + " " + b);
  CHECK(r.status == 0);
  CHECK(r.out == "1\n");

  // Planar clouds route through the LP solver.
  const std::string c = tmp.file("c.csv");
  const std::string d = tmp.file("d.csv");
  write_file(c, "weight,x_0,x_1\n1,0,0\n");
  write_file(d, "weight,x_0,x_1\n1,3,4\n");
  const auto r2 = run_cmd("w1 " + c + " " + d);
  CHECK(r2.status == 0);
  CHECK(r2.out == "5\n");
}

TEST_CASE("w1 with a malformed cloud exits 2") {
  TempDir tmp;
  const std::string bad = tmp.file("bad.csv");
  write_file(bad, "weight,x_0\n0.5,1\n");  // weights do not sum to 1
  const auto r = run_cmd("w1 " + bad + " " + bad);
  CHECK(r.status == 2);
  CHECK(r.out.find("error:") != std::string::npos);
}

TEST_CASE("experiment with one N writes exactly the three tabular files") {
  TempDir tmp;
  const std::string cfg = base_config(tmp);
  const auto r = run_cmd("experiment --config " + cfg + " --trials 1 --N 5");
  CHECK(r.status == 0);
  CHECK(fs::exists(tmp.file("exp_raw.csv")));
  CHECK(fs::exists(tmp.file("exp_summary.csv")));
  CHECK(fs::exists(tmp.file("exp_meta.json")));
  CHECK_FALSE(fs::exists(tmp.file("exp_plot.svg")));  // one point, nothing to fit
}

TEST_CASE("experiment with several N adds the plot") {
  TempDir tmp;
  const std::string cfg = base_config(tmp);
  const std::string prefix = tmp.file("multi");
  const auto r = run_cmd("experiment --config " + cfg + " --out " + prefix);
  INFO(r.out);
  CHECK(r.status == 0);
  // N_list comes from the config file; widen it via a second config.
  const std::string cfg2 = tmp.file("multi.cfg");
  write_file(cfg2,
             "model = benchmark\nT = 0.02\ndelta = 1e-3\nN_list = 3,6\ntrials = 2\nseed = 7\n"
             "out_prefix = " + prefix + "\n");
  const auto r2 = run_cmd("experiment --config " + cfg2);
  INFO(r2.out);
  CHECK(r2.status == 0);
  CHECK(fs::exists(prefix + "_raw.csv"));
  CHECK(fs::exists(prefix + "_plot.svg"));
  CHECK(r2.out.find("slope") != std::string::npos);
}

TEST_CASE("simulate writes a trajectory and diagnostics") {
  TempDir tmp;
  const std::string cfg = base_config(tmp);
  const std::string prefix = tmp.file("sim");
  const auto r = run_cmd("simulate --config " + cfg + " --out " + prefix +
                         " --seed 11 --renormalize on");
  INFO(r.out);
  CHECK(r.status == 0);
  CHECK(fs::exists(prefix + "_trajectory.csv"));
  CHECK(fs::exists(prefix + "_diagnostics.json"));

  std::ifstream traj(prefix + "_trajectory.csv");
  std::string header;
  std::getline(traj, header);
  CHECK(header == "step,time,particle,weight,x_0");

  std::ifstream diag(prefix + "_diagnostics.json");
  std::string blob((std::istreambuf_iterator<char>(diag)), std::istreambuf_iterator<char>());
  for (const char* key : {"psi_min", "tau_beta", "eN", "likelihood_mean", "slope"})
    CHECK(blob.find(key) != std::string::npos);
}

TEST_CASE("plot renders a summary CSV") {
  TempDir tmp;
  const std::string summary = tmp.file("summary.csv");
  write_file(summary,
             "N,mean_eN,stderr_eN,trials\n"
             "10,0.1,0.001,4\n"
             "100,0.01,0.0001,4\n");
  const std::string out = tmp.file("fig.svg");
  const auto r = run_cmd("plot " + summary + " --out " + out);
  CHECK(r.status == 0);
  CHECK(fs::exists(out));

  // A single-row summary cannot be fitted: runtime failure, exit 2.
  const std::string one = tmp.file("one.csv");
  write_file(one, "N,mean_eN,stderr_eN,trials\n10,0.1,0.001,4\n");
  CHECK(run_cmd("plot " + one + " --out " + out).status == 2);
}
