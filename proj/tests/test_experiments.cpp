#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "opsteer/experiments.hpp"
#include "opsteer/mpc.hpp"

using namespace opsteer;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("opsteer_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ExperimentRecord record_from_means(const std::vector<double>& means, double target) {
  ExperimentRecord r;
  r.scenario = default_scenario("steering");
  r.scenario.cost.target = target;
  r.scenario.model.n_agents = 1;
  const auto steps = static_cast<Eigen::Index>(means.size());
  r.states = RowMatrix(steps, 1);
  for (Eigen::Index t = 0; t < steps; ++t) r.states(t, 0) = means[static_cast<std::size_t>(t)];
  r.controls = RowMatrix::Zero(steps - 1, 1);
  r.indicators = MaskMatrix::Constant(steps - 1, 1, false);
  return r;
}

Scenario tiny(const std::string& name) {
  Scenario s = default_scenario(name);
  s.model.n_agents = 2;
  s.controller.mpc_horizon = 1;
  s.controller.planning_horizon = 2;
  s.controller.n_samples = 4;
  return s;
}

}  // namespace

TEST_CASE("built-in scenario defaults") {
  for (const auto& name : known_scenarios()) {
    const Scenario s = build_scenario(name);
    CHECK(s.name == name);
    CHECK(s.model.n_agents == 200);
    CHECK(s.active_fraction == 0.25);
    CHECK(s.model.alpha == 0.8);
    CHECK(s.model.sigma == 0.1);
    CHECK(s.model.epsilon == 1.0);
    CHECK(s.model.state_lo == -3.0);
    CHECK(s.model.state_hi == 3.0);
    CHECK(s.cost.q == 5.0);
    CHECK(s.cost.r == 0.1);
    CHECK(s.controller.planning_horizon == 10);
    CHECK(s.controller.mpc_horizon == 150);
    CHECK(s.controller.n_samples == 500);
    CHECK(s.controller.step_size == 1.0);
    CHECK(s.controller.iterations == 1);
    CHECK(s.controller.shape.kind == ShapeKind::kSoftElite);
    CHECK(s.controller.shape.elite_fraction == 0.1);
    CHECK(s.controller.sampling_std == 0.3);
    CHECK(s.controller.p_min == 0.01);
    CHECK(!s.controller.initial_probability);
  }
  const Scenario steering = build_scenario("steering");
  CHECK(steering.target() == 2.0);
  REQUIRE(steering.initial_distribution.size() == 1);
  CHECK(steering.initial_distribution[0].lo == -1.0);
  CHECK(steering.initial_distribution[0].hi == 1.0);

  const Scenario polarized = build_scenario("polarized");
  CHECK(polarized.target() == 0.0);
  REQUIRE(polarized.initial_distribution.size() == 2);
  CHECK(polarized.initial_distribution[0].lo == 2.0);
  CHECK(polarized.initial_distribution[0].hi == 3.0);
  CHECK(polarized.initial_distribution[1].lo == -3.0);
  CHECK(polarized.initial_distribution[1].hi == -2.0);
  CHECK(polarized.initial_distribution[0].weight == 0.5);
}

TEST_CASE("overrides") {
  const std::vector<std::string> low{"active_fraction=0.1"};
  Scenario s = build_scenario("polarized", low);
  CHECK(s.active_fraction == 0.1);
  json a = to_json(s);
  json b = to_json(build_scenario("polarized"));
  a.erase("active_fraction");
  b.erase("active_fraction");
  CHECK(a == b);

  const std::vector<std::string> many{"model.alpha=0.5", "controller.shape.kind=exponential",
                                      "controller.shape.lambda=0.02",
                                      "controller.initial_probability=0.3",
                                      "cost.target=-1", "controller.n_samples=64"};
  s = build_scenario("steering", many);
  CHECK(s.model.alpha == 0.5);
  CHECK(s.controller.shape.kind == ShapeKind::kExponential);
  CHECK(s.controller.shape.lambda == 0.02);
  CHECK(s.controller.initial_probability == 0.3);
  CHECK(s.target() == -1.0);
  CHECK(s.controller.n_samples == 64);

  const std::vector<std::string> same{"model.alpha=0.8"};
  CHECK(to_json(build_scenario("steering", same)) == to_json(build_scenario("steering")));

  for (const char* bad : {"model.alhpa=0.8", "model.alpha", "=3", "model..alpha=1",
                          "controller.n_samples=-5", "controller.n_samples=2.5",
                          "model=3", "model.alpha=fast", "model.alpha=1.7",
                          "controller.shape.kind=gaussian"}) {
    const std::vector<std::string> o{bad};
    CHECK_THROWS_AS(build_scenario("steering", o), std::invalid_argument);
  }
}

TEST_CASE("unknown scenario lists the known ones") {
  try {
    build_scenario("moonshot");
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("steering") != std::string::npos);
    CHECK(msg.find("polarized") != std::string::npos);
  }
}

TEST_CASE("scenario config files") {
  const auto dir = scratch_dir("config");
  const auto path = dir / "custom.json";
  std::ofstream(path) << R"({"base": "polarized", "name": "custom",
                            "active_fraction": 0.1, "model": {"n_agents": 50}})";
  const Scenario s = build_scenario(path.string());
  CHECK(s.name == "custom");
  CHECK(s.active_fraction == 0.1);
  CHECK(s.model.n_agents == 50);
  CHECK(s.target() == 0.0);

  // Writing a full config and reading it back reproduces it.
  const auto full = dir / "full.json";
  std::ofstream(full) << to_json(s).dump(2);
  CHECK(to_json(build_scenario(full.string())) == to_json(s));

  const auto bad = dir / "bad.json";
  std::ofstream(bad) << R"({"model": {"n_agentz": 50}})";
  CHECK_THROWS_AS(build_scenario(bad.string()), std::invalid_argument);
}

TEST_CASE("metrics") {
  SUBCASE("population at the target") {
    const auto r = record_from_means({2.0, 2.0, 2.0}, 2.0);
    const auto m = compute_metrics(r, 0.2);
    CHECK(m.terminal_distance == 0.0);
    CHECK(m.time_to_threshold == 0u);
    CHECK(m.control_effort == 0.0);
  }
  SUBCASE("time to threshold") {
    const auto r = record_from_means({0.0, 1.0, 1.9, 2.0}, 2.0);
    const auto m = compute_metrics(r, 0.2);
    CHECK(m.time_to_threshold == 2u);
    CHECK(m.mean.size() == 4);
    CHECK(m.terminal_distance == 0.0);
    const std::vector<double> never{0.0, 0.5};
    CHECK(!first_within(never, 2.0, 0.2));
  }
  SUBCASE("modes, effort and actuated means") {
    Scenario s = tiny("polarized");
    s.model.n_agents = 4;
    s.controller.mpc_horizon = 3;
    const auto r = run_controller(s, PolicyKind::kUncontrolled, 1);
    const auto m = compute_metrics(r, 0.2);
    CHECK(m.control_effort == 0.0);
    CHECK(m.positive_mode_size + m.negative_mode_size == 4);
    CHECK(m.mean.size() == 4);
    CHECK(!m.terminal_actuated_mean);
    CHECK(m.terminal_unactuated_mean);

    ExperimentRecord c = r;
    c.controls(0, 0) = 2.0;
    c.indicators(0, 0) = true;
    CHECK(compute_metrics(c, 0.2).control_effort == doctest::Approx(0.1 * 4.0));
    // Pure function of the record.
    CHECK(compute_metrics(r, 0.2).mean == m.mean);
  }
}

TEST_CASE("number formatting round-trips") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int k = 0; k < 1000; ++k) {
    const double v = normal(rng);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-3.0) == "-3");
}

TEST_CASE("trajectory output") {
  const auto dir = scratch_dir("outputs");
  for (auto kind : {PolicyKind::kFeedback, PolicyKind::kAdaptiveFeedback}) {
    const Scenario s = tiny("steering");
    const auto r = run_controller(s, kind, 3);
    const auto files = write_outputs(r, compute_metrics(r, s.threshold), dir);
    CHECK(files.trajectory.filename() ==
          "steering_" + std::string(to_string(kind)) + "_3_traj.csv");
    CHECK(files.summary.filename() ==
          "steering_" + std::string(to_string(kind)) + "_3_summary.json");

    const std::string text = slurp(files.trajectory);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);  // header + 2 steps x 2 agents

    const auto table = read_trajectory(files.trajectory);
    CHECK(table.states == r.states);
    CHECK(table.controls == r.controls);
    CHECK((table.indicators == r.indicators).all());
    CHECK(table.probs.has_value() == r.probs.has_value());
    if (r.probs) CHECK(*table.probs == *r.probs);

    const json summary = json::parse(slurp(files.summary));
    CHECK(summary.at("seed") == 3);
    CHECK(summary.at("policy") == to_string(kind));
    CHECK(scenario_from_json(summary.at("config")).name == "steering");
    CHECK(summary.at("metrics").contains("time_to_threshold"));

    // Same seed and config: byte-identical files.
    const auto again = run_controller(s, kind, 3);
    CHECK(trajectory_csv(again) == text);
  }
}

TEST_CASE("trajectory parse errors carry context") {
  CHECK_THROWS_WITH_AS(parse_trajectory_csv("step,agent,opinion\n"),
                       doctest::Contains("header"), std::runtime_error);
  const std::string header = "step,agent_id,opinion,active,control,actuation_prob\n";
  CHECK_THROWS_WITH_AS(parse_trajectory_csv(header + "0,0,abc,1,0.5,\n1,0,0.2,,,\n"),
                       doctest::Contains("line 2: bad opinion"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_trajectory_csv(header + "0,0,0.1,1,0.5\n"),
                       doctest::Contains("expected 6 columns"), std::runtime_error);
  CHECK_THROWS_AS(parse_trajectory_csv(header), std::runtime_error);
  CHECK_THROWS_AS(read_trajectory("/nonexistent/file.csv"), std::runtime_error);
}
