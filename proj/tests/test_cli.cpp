#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "seqvamp/config.hpp"
#include "seqvamp/experiment.hpp"
#include "seqvamp/numeric.hpp"

using namespace seqvamp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("seqvamp_test_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int code = -1;
  std::string err;
};

Run cli(const fs::path& dir, const std::string& config, const std::string& extra = "") {
  const char* exe = std::getenv("SEQVAMP_CLI");
  REQUIRE(exe != nullptr);
  const fs::path cfg = dir / "run.cfg";
  std::ofstream(cfg) << config;
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(exe) + " --quiet --config " + cfg.string() + " " + extra + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

std::string simulate_config(const fs::path& out, double eta, bool force = false) {
  std::ostringstream s;
  s << "mode = simulate\n[ensemble]\nkind = gaussian-iid\nN = 256\nP = 128\n[teacher]\nbeta = 0.2\nsigma = 0.1\n"
    << "[run]\neta = " << eta << "\nT = 12\nseeds = 3\n"
    << (force ? "force_all_ones_mask = true\n" : "") << "[output]\ndir = " << out.string() << "\n";
  return s.str();
}

}  // namespace

TEST_CASE("config parser diagnostics") {
  ExperimentConfig c = parse_config("mode = theory\n[ensemble]\nkind = gaussian-iid\nN = 10\nP = 5\n", "x.cfg");
  CHECK(c.mode == Mode::Theory);
  CHECK(c.q() == doctest::Approx(0.5));
  try {
    parse_config("mode = theory\n[ensemble]\nkind = gaussian-iid\nN = 10\nP = 5\nbogus = 1\n", "x.cfg");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("x.cfg:6") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("mode = theory\nmode = simulate\n", "x.cfg"), Error);
  CHECK_THROWS_AS(parse_config("mode = dance\n", "x.cfg"), Error);
  CHECK(parse_seed_list("1, 2,5") == std::vector<std::uint64_t>{1, 2, 5});
}

TEST_CASE("vector files round-trip") {
  const fs::path d = scratch("vec");
  std::vector<Eigen::VectorXd> v = {Eigen::VectorXd::LinSpaced(7, -1.0, 2.0), Eigen::VectorXd::Constant(7, 1e-300)};
  write_vectors(d / "v.bin", v);
  std::vector<Eigen::VectorXd> back = read_vectors(d / "v.bin");
  REQUIRE(back.size() == 2);
  CHECK(back[0] == v[0]);
  CHECK(back[1] == v[1]);
  std::ofstream(d / "bad.bin") << "nope";
  CHECK_THROWS(read_vectors(d / "bad.bin"));
}

TEST_CASE("invalid config exits with a one-line record") {
  const fs::path d = scratch("invalid");
  Run r = cli(d, "mode = simulate\n[run]\neta = 1.5\n");
  CHECK(r.code == 2);
  REQUIRE(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  nlohmann::json j = nlohmann::json::parse(r.err);
  CHECK(j["exit_code"] == 2);
  CHECK(j["message"].get<std::string>().find(":3:") != std::string::npos);

  Run u = cli(d, "mode = simulate\n[run]\nettta = 0.5\n");
  CHECK(u.code == 2);
  CHECK(u.err.find("ettta") != std::string::npos);
}

TEST_CASE("simulate is reproducible and eta one matches the forced mask") {
  const fs::path d = scratch("sim");
  Run a = cli(d, simulate_config(d / "a", 1.0));
  Run b = cli(d, simulate_config(d / "b", 1.0, true));
  Run c = cli(d, simulate_config(d / "c", 1.0));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  REQUIRE(c.code == 0);
  const std::string ta = slurp(d / "a" / "seed_3" / "trajectory.csv");
  CHECK_FALSE(ta.empty());
  CHECK(ta == slurp(d / "b" / "seed_3" / "trajectory.csv"));
  for (const char* f : {"trajectory.csv", "c_phi.csv", "c_gamma.csv", "distance.csv"})
    CHECK(slurp(d / "a" / "seed_3" / f) == slurp(d / "c" / "seed_3" / f));
  CHECK(ta.rfind("t,chi,lambda,tau,nu,update_fraction,error,phi_sq", 0) == 0);

  Run s = cli(d, simulate_config(d / "s", 0.5), "--seeds 4,5 --out " + (d / "s2").string());
  CHECK(s.code == 0);
  CHECK(fs::exists(d / "s2" / "seed_4" / "trajectory.csv"));
  CHECK(fs::exists(d / "s2" / "seed_5" / "trajectory.csv"));
  CHECK(fs::exists(d / "s2" / "summary.csv"));
}

TEST_CASE("divergent simulation exits with code 4") {
  const fs::path d = scratch("div");
  Run r = cli(d, "mode = simulate\n[ensemble]\nkind = gaussian-iid\nN = 512\nP = 256\n[teacher]\nbeta = 0.5\n"
                 "sigma = 0\n[run]\neta = 0.8\nT = 60\nseeds = 1\n[output]\ndir = " +
                     (d / "o").string() + "\n");
  CHECK(r.code == 4);
  nlohmann::json j = nlohmann::json::parse(r.err);
  CHECK(j["status"] == "divergence");
  CHECK(j["step"].get<int>() > 0);
}

TEST_CASE("theory, fixed-point and phase-scan outputs") {
  const fs::path d = scratch("modes");
  const std::string common =
      "[ensemble]\nkind = gaussian-iid\nN = 300\nP = 200\n[teacher]\nbeta = 0.2\nsigma = 0.1\n[run]\neta = 0.5\n"
      "T = 4\n";
  Run t = cli(d, "mode = theory\n" + common + "[output]\ndir = " + (d / "t").string() + "\n");
  CHECK(t.code == 0);
  for (const char* f : {"scalars.csv", "c_phi.csv", "c_gamma.csv"}) CHECK(fs::exists(d / "t" / f));

  Run f = cli(d, "mode = fixed-point\n" + common + "[output]\ndir = " + (d / "f").string() + "\n");
  CHECK(f.code == 0);
  CHECK(slurp(d / "f" / "fixed_point.csv").find("converged") != std::string::npos);
  CHECK(fs::exists(d / "f" / "transient.csv"));

  Run p = cli(d, "mode = phase-scan\n[ensemble]\nkind = gaussian-iid\nN = 300\nP = 200\n[scan]\nbeta0 = 0.1,0.3\n"
                 "sigma0 = 0.1\nq = 0.6667\neta = 0.5\n[output]\ndir = " +
                     (d / "p").string() + "\n");
  CHECK(p.code == 0);
  std::istringstream rows(slurp(d / "p" / "phase_scan.csv"));
  int lines = 0;
  for (std::string line; std::getline(rows, line);) ++lines;
  CHECK(lines == 3);
  CHECK(fs::exists(d / "p" / "crossings.csv"));
}
