#include "opsteer/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "opsteer/experiments.hpp"
#include "opsteer/mpc.hpp"
#include "opsteer/parallel.hpp"

namespace opsteer {
namespace {

std::uint64_t parse_seed(std::string_view text) {
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw std::invalid_argument("bad seed '" + std::string(text) + "'");
  }
  return value;
}

std::string valid_policies() {
  std::string out;
  for (auto kind : {PolicyKind::kOpenLoop, PolicyKind::kFeedback,
                    PolicyKind::kAdaptiveFeedback, PolicyKind::kBaseline,
                    PolicyKind::kUncontrolled}) {
    if (!out.empty()) out += ", ";
    out += to_string(kind);
  }
  return out;
}

std::vector<PolicyKind> parse_policies(const std::string& text) {
  std::vector<PolicyKind> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item == "all") {
      out.insert(out.end(), {PolicyKind::kOpenLoop, PolicyKind::kFeedback,
                             PolicyKind::kAdaptiveFeedback, PolicyKind::kBaseline,
                             PolicyKind::kUncontrolled});
      continue;
    }
    const auto kind = parse_policy_kind(item);
    if (!kind) {
      throw std::invalid_argument("unknown policy '" + item +
                                  "'; valid policies: " + valid_policies() + ", all");
    }
    out.push_back(*kind);
  }
  if (out.empty()) throw std::invalid_argument("no policy given");
  return out;
}

std::string summary_line(const ExperimentRecord& record, const Metrics& m) {
  std::ostringstream line;
  line << record.scenario.name << ' ' << to_string(record.policy) << " seed="
       << record.seed << " terminal_mean=" << m.mean.back()
       << " terminal_distance=" << m.terminal_distance << " time_to_threshold=";
  if (m.time_to_threshold) {
    line << *m.time_to_threshold;
  } else {
    line << "none";
  }
  line << " control_effort=" << m.control_effort;
  return line.str();
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse_seed(item));
      continue;
    }
    const auto lo = parse_seed(std::string_view(item).substr(0, dash));
    const auto hi = parse_seed(std::string_view(item).substr(dash + 1));
    if (hi < lo) throw std::invalid_argument("bad seed range '" + item + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw std::invalid_argument("no seeds given");
  return out;
}

int parse_and_run(int argc, const char* const* argv, std::ostream& out,
                  std::ostream& err) {
  CLI::App app{"Stochastic-search MPC for steering opinion dynamics", "opinion_steer"};
  std::string scenario = "steering";
  std::string policies = "adaptive";
  std::string seeds = "0";
  std::string output_dir;
  std::vector<std::string> overrides;
  std::size_t jobs = 1;
  app.add_option("--scenario", scenario,
                 "Built-in scenario (steering, polarized) or JSON config path");
  app.add_option("--policy", policies,
                 "Comma-separated policies: " + valid_policies() + ", all");
  app.add_option("--seeds", seeds, "Seeds, e.g. 0,3,7 or 0-4");
  app.add_option("--out", output_dir,
                 "Output directory (default: $OPINION_STEER_OUT or ./results)");
  app.add_option("--set", overrides, "Override a config value: dotted.key=value")
      ->take_all();
  app.add_option("--jobs", jobs, "Number of worker threads")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  RunRequest request;
  Scenario base;
  try {
    request.scenario = scenario;
    request.policies = parse_policies(policies);
    request.seeds = parse_seed_list(seeds);
    request.overrides = overrides;
    request.jobs = jobs;
    if (output_dir.empty()) {
      const char* env = std::getenv("OPINION_STEER_OUT");
      output_dir = env && *env ? env : "results";
    }
    request.output_dir = output_dir;
    base = build_scenario(request.scenario, request.overrides);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  struct Job {
    PolicyKind policy;
    std::uint64_t seed;
  };
  std::vector<Job> work;
  for (auto p : request.policies) {
    for (auto s : request.seeds) work.push_back({p, s});
  }
  std::vector<std::string> lines(work.size());
  // A single run gets every thread for its rollouts; otherwise runs are
  // spread across the pool. Results are identical either way.
  const std::size_t run_threads = work.size() == 1 ? request.jobs : 1;

  try {
    parallel_for(work.size(), request.jobs, [&](std::size_t k) {
      const auto record = run_controller(base, work[k].policy, work[k].seed, run_threads);
      const auto metrics = compute_metrics(record, base.threshold);
      write_outputs(record, metrics, request.output_dir);
      lines[k] = summary_line(record, metrics);
    });
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  for (const auto& line : lines) out << line << "\n";
  return kExitOk;
}

}  // namespace opsteer
