#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "opsteer/cli.hpp"

using namespace opsteer;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

const std::vector<std::string> kSmall{
    "--set", "model.n_agents=8",       "--set", "controller.mpc_horizon=3",
    "--set", "controller.n_samples=6", "--set", "controller.planning_horizon=3"};

Result run(std::vector<std::string> args, bool small = true) {
  if (small) args.insert(args.end(), kSmall.begin(), kSmall.end());
  std::vector<const char*> argv{"opinion_steer"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = parse_and_run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("opsteer_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t file_count(const fs::path& dir) {
  if (!fs::exists(dir)) return 0;
  return static_cast<std::size_t>(
      std::distance(fs::directory_iterator(dir), fs::directory_iterator()));
}

}  // namespace

TEST_CASE("seed lists") {
  CHECK(parse_seed_list("4") == std::vector<std::uint64_t>{4});
  CHECK(parse_seed_list("0-2,7") == std::vector<std::uint64_t>{0, 1, 2, 7});
  CHECK_THROWS_AS(parse_seed_list("3-1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_seed_list("x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_seed_list(""), std::invalid_argument);
}

TEST_CASE("happy path writes two files per run") {
  const auto dir = fresh_dir("happy");
  const auto r = run({"--scenario", "steering", "--policy", "adaptive", "--seeds", "0", "--out",
                      dir.string()});
  CHECK(r.code == kExitOk);
  CHECK(file_count(dir) == 2);
  CHECK(fs::exists(dir / "steering_adaptive_0_traj.csv"));
  CHECK(fs::exists(dir / "steering_adaptive_0_summary.json"));
  CHECK(r.out.find("steering adaptive seed=0") != std::string::npos);
}

TEST_CASE("validation failures exit 2 and write nothing") {
  const auto dir = fresh_dir("invalid");
  auto r = run({"--policy", "warp_drive", "--out", dir.string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("open_loop") != std::string::npos);
  CHECK(r.err.find("adaptive") != std::string::npos);

  r = run({"--warp", "9", "--out", dir.string()});
  CHECK(r.code == kExitUsage);
  r = run({"--set", "model.alpha", "--out", dir.string()});
  CHECK(r.code == kExitUsage);
  r = run({"--set", "model.alhpa=0.3", "--out", dir.string()});
  CHECK(r.code == kExitUsage);
  r = run({"--scenario", "moonshot", "--out", dir.string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("polarized") != std::string::npos);
  r = run({"--seeds", "a-b", "--out", dir.string()});
  CHECK(r.code == kExitUsage);
  r = run({"--jobs", "0", "--out", dir.string()});
  CHECK(r.code == kExitUsage);
  CHECK(!fs::exists(dir));
}

TEST_CASE("help exits 0") {
  const auto r = run({"--help"}, false);
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("--scenario") != std::string::npos);
}

TEST_CASE("runtime failures exit 1") {
  const auto dir = fresh_dir("runtime");
  fs::create_directories(dir);
  std::ofstream(dir / "blocker") << "x";
  const auto r = run({"--out", (dir / "blocker" / "sub").string()});
  CHECK(r.code == kExitRuntime);
  CHECK(r.err.find("blocker") != std::string::npos);
}

TEST_CASE("idempotent override produces identical bytes") {
  const auto a = fresh_dir("idem_a");
  const auto b = fresh_dir("idem_b");
  REQUIRE(run({"--policy", "feedback", "--seeds", "1", "--out", a.string()}).code == 0);
  REQUIRE(run({"--policy", "feedback", "--seeds", "1", "--out", b.string(), "--set",
               "model.alpha=0.8"})
              .code == 0);
  for (const char* f : {"steering_feedback_1_traj.csv", "steering_feedback_1_summary.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
}

TEST_CASE("job count does not change outputs") {
  const auto serial = fresh_dir("jobs1");
  const auto parallel = fresh_dir("jobs3");
  const std::vector<std::string> common{"--scenario", "polarized", "--policy", "all", "--seeds",
                                        "0-1"};
  auto args1 = common;
  args1.insert(args1.end(), {"--jobs", "1", "--out", serial.string()});
  auto args3 = common;
  args3.insert(args3.end(), {"--jobs", "3", "--out", parallel.string()});
  const auto r1 = run(args1);
  const auto r3 = run(args3);
  REQUIRE(r1.code == 0);
  REQUIRE(r3.code == 0);
  CHECK(r1.out == r3.out);
  CHECK(file_count(serial) == 20);
  for (const auto& entry : fs::directory_iterator(serial)) {
    CHECK(slurp(entry.path()) == slurp(parallel / entry.path().filename()));
  }
  // A single run spreads its rollouts over the workers instead.
  const auto single1 = fresh_dir("single1");
  const auto single4 = fresh_dir("single4");
  REQUIRE(run({"--policy", "adaptive", "--jobs", "1", "--out", single1.string()}).code == 0);
  REQUIRE(run({"--policy", "adaptive", "--jobs", "4", "--out", single4.string()}).code == 0);
  CHECK(slurp(single1 / "steering_adaptive_0_traj.csv") ==
        slurp(single4 / "steering_adaptive_0_traj.csv"));
}

TEST_CASE("output directory defaults to OPINION_STEER_OUT") {
  const auto dir = fresh_dir("env");
  ::setenv("OPINION_STEER_OUT", dir.string().c_str(), 1);
  const auto r = run({"--policy", "baseline"});
  ::unsetenv("OPINION_STEER_OUT");
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "steering_baseline_0_traj.csv"));
}
