#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kCli = HAMAVG_CLI;
const std::string kConfigs = HAMAVG_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hamavg_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

// Runs the CLI, returns its exit code; stderr goes to `err` when given.
int run(const std::string& args, const fs::path& err = {}) {
  std::string cmd = kCli + " " + args + " > /dev/null";
  cmd += err.empty() ? " 2>&1" : " 2> " + err.string();
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string cfg(const std::string& f) { return "--config " + kConfigs + "/" + f; }

}  // namespace

TEST_CASE("graph dumps H2 with three edges") {
  const fs::path out = scratch("graph");
  REQUIRE(run("graph " + cfg("h2.ini") + " --out-dir " + out.string()) == 0);
  const json g = json::parse(slurp(out / "graph.json"));
  CHECK(g["n_edges"] == 3);
  CHECK(g["edges"].size() == 3);
  CHECK(g["vertices"].size() == 4);
  const json m = json::parse(slurp(out / "manifest.json"));
  CHECK(m["command"] == "graph");
  CHECK(m["seed"] == 1);
  CHECK(m["config_hash"].get<std::string>().rfind("fnv1a64:", 0) == 0);
  CHECK(m.contains("versions"));
  CHECK(m.contains("timings_s"));
}

TEST_CASE("check on H1 passes") {
  const fs::path out = scratch("check");
  REQUIRE(run("check " + cfg("h1.ini") + " --out-dir " + out.string()) == 0);
  const json j = json::parse(slurp(out / "check.json"));
  for (const char* k : {"ibp", "pullback", "alpha_indep", "bprime_eq_c", "flux", "derivative_lemma", "mass"}) {
    CAPTURE(k);
    REQUIRE(j.contains(k));
    CHECK(j[k]["verdict"] == "PASS");
    CHECK(j[k].contains("residual"));
  }
  CHECK(j["verdict"] == "PASS");
}

TEST_CASE("validation errors exit with 1 and name the section") {
  const fs::path out = scratch("bad");
  fs::create_directories(out);
  const fs::path err = out / "stderr.txt";
  CHECK(run("sim2d " + cfg("h1.ini") + " --set sde.dt=2 --out-dir " + out.string(), err) == 1);
  CHECK(slurp(err).find("[sde]") != std::string::npos);
  CHECK(run("graph --config /nonexistent.ini", err) == 1);
  CHECK(run("graph " + cfg("h1.ini") + " --set system.colour=red", err) == 1);
  CHECK(slurp(err).find("[system] colour") != std::string::npos);
  CHECK(run("frobnicate " + cfg("h1.ini")) != 0);
  CHECK(run("graph") == 1);
}

TEST_CASE("sim2d output is byte identical for identical config and seed") {
  const fs::path a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  const std::string common = "sim2d " + cfg("h1.ini") + " --set sde.n_paths=50 --set sde.t_end=0.1 "
                             "--set sde.snapshot_times=0.05,0.1";
  REQUIRE(run(common + " --threads 2 --out-dir " + a.string()) == 0);
  REQUIRE(run(common + " --threads 1 --out-dir " + b.string()) == 0);
  REQUIRE(run(common + " --seed 2 --out-dir " + c.string()) == 0);
  const std::string sa = slurp(a / "sim2d.csv");
  CHECK(sa.rfind("path,t,x1,x2,H,edge_id,m", 0) == 0);
  CHECK(sa == slurp(b / "sim2d.csv"));
  CHECK(sa != slurp(c / "sim2d.csv"));
}

TEST_CASE("simgraph and coeffs outputs") {
  const fs::path out = scratch("simgraph");
  REQUIRE(run("simgraph " + cfg("h2.ini") + " --set graph_sde.n_paths=50 --out-dir " + out.string()) == 0);
  CHECK(slurp(out / "simgraph.csv").rfind("path,t,edge_id,m", 0) == 0);
  CHECK(fs::exists(out / "splits.csv"));
  REQUIRE(run("coeffs " + cfg("h2.ini") + " --out-dir " + out.string()) == 0);
  for (int e = 0; e < 3; ++e)
    CHECK(slurp(out / ("coeffs_edge" + std::to_string(e) + ".csv")).rfind("m,T,S2,B0,B1,a,b,c,d,err_est\n", 0) == 0);
}

TEST_CASE("output directory from the environment") {
  const fs::path out = scratch("env");
  const std::string cmd = "HAMAVG_OUT_DIR=" + out.string() + " " + kCli + " graph " + cfg("h1.ini") + " > /dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(out / "graph.json"));
}

TEST_CASE("study needs its sections") {
  const fs::path out = scratch("study");
  CHECK(run("study " + cfg("h1.ini") + " --out-dir " + out.string()) == 1);
}
