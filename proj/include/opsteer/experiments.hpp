#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "opsteer/scenario.hpp"

namespace opsteer {

using json = nlohmann::json;

// Built-in scenario names.
std::vector<std::string> known_scenarios();

// Default configuration of a built-in scenario; throws std::invalid_argument
// listing the known names otherwise.
Scenario default_scenario(std::string_view name);

json to_json(const Scenario& scenario);
Scenario scenario_from_json(const json& j);

// Merges `patch` into `config`. Every key of the patch must already exist in
// the config and keep its JSON type (null slots accept any value); unknown
// keys are errors.
void merge_checked(json& config, const json& patch, const std::string& where = "");

// Applies one "dotted.path=value" assignment. The value is parsed as JSON
// when possible and as a bare string otherwise.
void apply_override(json& config, std::string_view assignment);

// Resolves a built-in scenario name or a path to a JSON config file, then
// applies the overrides in order. Config files start from the built-in
// scenario named by their optional "base" key (default "steering").
Scenario build_scenario(std::string_view name_or_path,
                        std::span<const std::string> overrides = {});

struct Metrics {
  std::vector<double> mean;    // per step, T_mpc + 1 entries
  std::vector<double> stddev;  // population standard deviation
  // Agents split by the sign of their initial opinion (zero counts as
  // positive). Empty modes have no entries.
  std::size_t positive_mode_size = 0;
  std::size_t negative_mode_size = 0;
  std::vector<double> positive_mode_mean;
  std::vector<double> negative_mode_mean;
  std::optional<std::size_t> time_to_threshold;
  double control_effort = 0.0;  // sum of r u^2 over all executed controls
  double terminal_distance = 0.0;
  // Final-state means over agents actuated / not actuated at the last
  // executed step.
  std::optional<double> terminal_actuated_mean;
  std::optional<double> terminal_unactuated_mean;
};

// First index whose value lies within `threshold` of `target`.
std::optional<std::size_t> first_within(std::span<const double> values,
                                        double target, double threshold);

Metrics compute_metrics(const ExperimentRecord& record, double threshold);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

std::string trajectory_csv(const ExperimentRecord& record);
json summary_json(const ExperimentRecord& record, const Metrics& metrics);

struct OutputFiles {
  std::filesystem::path trajectory;
  std::filesystem::path summary;
};

std::string output_stem(const ExperimentRecord& record);
OutputFiles output_paths(const std::filesystem::path& dir,
                         const ExperimentRecord& record);

// Writes `{scenario}_{policy}_{seed}_traj.csv` and `..._summary.json`.
OutputFiles write_outputs(const ExperimentRecord& record, const Metrics& metrics,
                          const std::filesystem::path& output_dir);

// Trajectory data recovered from a written table.
struct TrajectoryTable {
  RowMatrix states;
  RowMatrix controls;
  MaskMatrix indicators;
  std::optional<RowMatrix> probs;
};

TrajectoryTable parse_trajectory_csv(std::string_view text);
TrajectoryTable read_trajectory(const std::filesystem::path& path);

}  // namespace opsteer
