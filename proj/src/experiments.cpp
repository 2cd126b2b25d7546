#include "opsteer/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace opsteer {
namespace fs = std::filesystem;

namespace {

Scenario common_defaults() {
  Scenario s;
  s.model = ModelParams{};  // alpha 0.8, sigma 0.1, epsilon 1, N 200, [-3, 3]
  s.cost = CostSpec{5.0, 0.1, 0.0};
  s.active_fraction = 0.25;
  s.threshold = 0.2;
  s.controller = ControllerConfig{};
  s.controller.shape = ShapeSpec{ShapeKind::kSoftElite, 1.0, 0.1, 10.0};
  return s;
}

std::string_view to_string(ShapeKind kind) {
  return kind == ShapeKind::kExponential ? "exponential" : "soft_elite";
}

ShapeKind parse_shape_kind(const std::string& name) {
  if (name == "exponential") return ShapeKind::kExponential;
  if (name == "soft_elite") return ShapeKind::kSoftElite;
  throw std::invalid_argument("unknown shape kind '" + name +
                              "' (expected exponential or soft_elite)");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

bool compatible(const json& existing, const json& value) {
  if (existing.is_null() || value.is_null()) return true;
  if (existing.is_number_unsigned()) return value.is_number_unsigned();
  if (existing.is_number()) return value.is_number();
  return existing.type() == value.type();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no, const char* column) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("trajectory line " + std::to_string(line_no) +
                             ": bad " + column + " value '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::vector<std::string> known_scenarios() { return {"steering", "polarized"}; }

Scenario default_scenario(std::string_view name) {
  Scenario s = common_defaults();
  if (name == "steering") {
    s.name = "steering";
    s.initial_distribution = {{-1.0, 1.0, 1.0}};
    s.cost.target = 2.0;
  } else if (name == "polarized") {
    s.name = "polarized";
    s.initial_distribution = {{2.0, 3.0, 0.5}, {-3.0, -2.0, 0.5}};
    s.cost.target = 0.0;
  } else {
    throw std::invalid_argument("unknown scenario '" + std::string(name) +
                                "'; known scenarios: " + join(known_scenarios()));
  }
  return s;
}

json to_json(const Scenario& s) {
  json mixture = json::array();
  for (const auto& c : s.initial_distribution) {
    mixture.push_back({{"lo", c.lo}, {"hi", c.hi}, {"weight", c.weight}});
  }
  const auto& m = s.model;
  const auto& c = s.controller;
  return json{
      {"name", s.name},
      {"initial_distribution", mixture},
      {"exact_mode_split", s.exact_mode_split},
      {"active_fraction", s.active_fraction},
      {"threshold", s.threshold},
      {"model",
       {{"alpha", m.alpha},
        {"sigma", m.sigma},
        {"epsilon", m.epsilon},
        {"n_agents", m.n_agents},
        {"state_lo", m.state_lo},
        {"state_hi", m.state_hi},
        {"state_dim", m.state_dim}}},
      {"cost", {{"q", s.cost.q}, {"r", s.cost.r}, {"target", s.cost.target}}},
      {"controller",
       {{"planning_horizon", c.planning_horizon},
        {"mpc_horizon", c.mpc_horizon},
        {"n_samples", c.n_samples},
        {"step_size", c.step_size},
        {"iterations", c.iterations},
        {"sampling_std", c.sampling_std},
        {"shape",
         {{"kind", to_string(c.shape.kind)},
          {"lambda", c.shape.lambda},
          {"elite_fraction", c.shape.elite_fraction},
          {"sharpness", c.shape.sharpness}}},
        {"initial_probability",
         c.initial_probability ? json(*c.initial_probability) : json(nullptr)},
        {"p_min", c.p_min}}},
  };
}

Scenario scenario_from_json(const json& j) {
  try {
    Scenario s;
    s.name = j.at("name").get<std::string>();
    for (const auto& c : j.at("initial_distribution")) {
      s.initial_distribution.push_back(
          {c.at("lo").get<double>(), c.at("hi").get<double>(), c.at("weight").get<double>()});
    }
    s.exact_mode_split = j.at("exact_mode_split").get<bool>();
    s.active_fraction = j.at("active_fraction").get<double>();
    s.threshold = j.at("threshold").get<double>();

    const auto& m = j.at("model");
    s.model.alpha = m.at("alpha").get<double>();
    s.model.sigma = m.at("sigma").get<double>();
    s.model.epsilon = m.at("epsilon").get<double>();
    s.model.n_agents = m.at("n_agents").get<std::size_t>();
    s.model.state_lo = m.at("state_lo").get<double>();
    s.model.state_hi = m.at("state_hi").get<double>();
    s.model.state_dim = m.at("state_dim").get<std::size_t>();

    const auto& cost = j.at("cost");
    s.cost = CostSpec{cost.at("q").get<double>(), cost.at("r").get<double>(),
                      cost.at("target").get<double>()};

    const auto& c = j.at("controller");
    auto& cc = s.controller;
    cc.planning_horizon = c.at("planning_horizon").get<std::size_t>();
    cc.mpc_horizon = c.at("mpc_horizon").get<std::size_t>();
    cc.n_samples = c.at("n_samples").get<std::size_t>();
    cc.step_size = c.at("step_size").get<double>();
    cc.iterations = c.at("iterations").get<std::size_t>();
    cc.sampling_std = c.at("sampling_std").get<double>();
    const auto& shape = c.at("shape");
    cc.shape.kind = parse_shape_kind(shape.at("kind").get<std::string>());
    cc.shape.lambda = shape.at("lambda").get<double>();
    cc.shape.elite_fraction = shape.at("elite_fraction").get<double>();
    cc.shape.sharpness = shape.at("sharpness").get<double>();
    const auto& p0 = c.at("initial_probability");
    if (p0.is_null()) {
      cc.initial_probability.reset();
    } else {
      cc.initial_probability = p0.get<double>();
    }
    cc.p_min = c.at("p_min").get<double>();
    return s;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario config: ") + e.what());
  }
}

void merge_checked(json& config, const json& patch, const std::string& where) {
  if (!patch.is_object()) {
    throw std::invalid_argument("config patch at '" + where + "' is not an object");
  }
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!config.is_object() || !config.contains(key)) {
      throw std::invalid_argument("unknown config key '" + path + "'");
    }
    json& slot = config[key];
    if (slot.is_object()) {
      merge_checked(slot, value, path);
    } else if (!compatible(slot, value)) {
      throw std::invalid_argument("config key '" + path + "' expects a " +
                                  std::string(slot.type_name()) + ", got " +
                                  std::string(value.type_name()));
    } else {
      slot = value;
    }
  }
}

void apply_override(json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw std::invalid_argument("malformed override '" + std::string(assignment) +
                                "' (expected key=value)");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json patch = value;
  const auto parts = split(path, '.');
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (it->empty()) {
      throw std::invalid_argument("malformed override path '" + path + "'");
    }
    patch = json{{std::string(*it), patch}};
  }
  merge_checked(config, patch);
}

Scenario build_scenario(std::string_view name_or_path,
                        std::span<const std::string> overrides) {
  json config;
  const auto names = known_scenarios();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
    config = to_json(default_scenario(name_or_path));
  } else if (fs::is_regular_file(fs::path(name_or_path))) {
    std::ifstream in{fs::path(name_or_path)};
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded() || !file.is_object()) {
      throw std::invalid_argument("scenario config '" + std::string(name_or_path) +
                                  "' is not a JSON object");
    }
    const std::string base = file.value("base", std::string("steering"));
    file.erase("base");
    config = to_json(default_scenario(base));
    merge_checked(config, file);
  } else {
    throw std::invalid_argument("unknown scenario '" + std::string(name_or_path) +
                                "' (not a built-in name or a config file); known scenarios: " +
                                join(names));
  }
  for (const auto& o : overrides) apply_override(config, o);
  Scenario s = scenario_from_json(config);
  s.validate();
  return s;
}

std::optional<std::size_t> first_within(std::span<const double> values,
                                        double target, double threshold) {
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (std::abs(values[t] - target) <= threshold) return t;
  }
  return std::nullopt;
}

Metrics compute_metrics(const ExperimentRecord& record, double threshold) {
  Metrics out;
  const Eigen::Index steps = record.states.rows();
  const Eigen::Index n = record.states.cols();
  const double target = record.scenario.target();

  std::vector<bool> positive(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    positive[static_cast<std::size_t>(i)] = record.states(0, i) >= 0.0;
    (record.states(0, i) >= 0.0 ? out.positive_mode_size : out.negative_mode_size)++;
  }

  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto row = record.states.row(t);
    const double mean = row.mean();
    out.mean.push_back(mean);
    out.stddev.push_back(std::sqrt((row.array() - mean).square().mean()));
    double pos_sum = 0.0;
    double neg_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      (positive[static_cast<std::size_t>(i)] ? pos_sum : neg_sum) += row[i];
    }
    if (out.positive_mode_size > 0) {
      out.positive_mode_mean.push_back(pos_sum / static_cast<double>(out.positive_mode_size));
    }
    if (out.negative_mode_size > 0) {
      out.negative_mode_mean.push_back(neg_sum / static_cast<double>(out.negative_mode_size));
    }
  }

  out.time_to_threshold = first_within(out.mean, target, threshold);
  out.control_effort = record.scenario.cost.r * record.controls.squaredNorm();
  out.terminal_distance = std::abs(out.mean.back() - target);

  if (record.indicators.rows() > 0) {
    const Eigen::Index last = record.indicators.rows() - 1;
    double on_sum = 0.0, off_sum = 0.0;
    std::size_t on = 0, off = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = record.states(steps - 1, i);
      if (record.indicators(last, i)) {
        on_sum += x;
        ++on;
      } else {
        off_sum += x;
        ++off;
      }
    }
    if (on > 0) out.terminal_actuated_mean = on_sum / static_cast<double>(on);
    if (off > 0) out.terminal_unactuated_mean = off_sum / static_cast<double>(off);
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

std::string trajectory_csv(const ExperimentRecord& record) {
  std::string out = "step,agent_id,opinion,active,control,actuation_prob\n";
  const Eigen::Index steps = record.states.rows();
  const Eigen::Index n = record.states.cols();
  const Eigen::Index executed = record.controls.rows();
  out.reserve(static_cast<std::size_t>(steps * n) * 48);
  for (Eigen::Index t = 0; t < steps; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      out += std::to_string(t);
      out += ',';
      out += std::to_string(i);
      out += ',';
      out += format_double(record.states(t, i));
      out += ',';
      // The terminal state has no executed control.
      if (t < executed) {
        out += record.indicators(t, i) ? '1' : '0';
        out += ',';
        out += format_double(record.controls(t, i));
        out += ',';
        if (record.probs) out += format_double((*record.probs)(t, i));
      } else {
        out += ",,";
      }
      out += '\n';
    }
  }
  return out;
}

json summary_json(const ExperimentRecord& record, const Metrics& metrics) {
  auto optional_number = [](const auto& v) { return v ? json(*v) : json(nullptr); };
  return json{
      {"scenario", record.scenario.name},
      {"policy", to_string(record.policy)},
      {"seed", record.seed},
      {"config", to_json(record.scenario)},
      {"metrics",
       {{"threshold", record.scenario.threshold},
        {"time_to_threshold", optional_number(metrics.time_to_threshold)},
        {"terminal_distance", metrics.terminal_distance},
        {"control_effort", metrics.control_effort},
        {"terminal_mean", metrics.mean.back()},
        {"terminal_actuated_mean", optional_number(metrics.terminal_actuated_mean)},
        {"terminal_unactuated_mean", optional_number(metrics.terminal_unactuated_mean)},
        {"positive_mode_size", metrics.positive_mode_size},
        {"negative_mode_size", metrics.negative_mode_size},
        {"mean", metrics.mean},
        {"stddev", metrics.stddev},
        {"positive_mode_mean", metrics.positive_mode_mean},
        {"negative_mode_mean", metrics.negative_mode_mean}}},
  };
}

std::string output_stem(const ExperimentRecord& record) {
  return record.scenario.name + "_" + std::string(to_string(record.policy)) + "_" +
         std::to_string(record.seed);
}

OutputFiles output_paths(const fs::path& dir, const ExperimentRecord& record) {
  const std::string stem = output_stem(record);
  return {dir / (stem + "_traj.csv"), dir / (stem + "_summary.json")};
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace

OutputFiles write_outputs(const ExperimentRecord& record, const Metrics& metrics,
                          const fs::path& output_dir) {
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory '" +
                             output_dir.string() + "': " + ec.message());
  }
  const OutputFiles files = output_paths(output_dir, record);
  write_file(files.trajectory, trajectory_csv(record));
  write_file(files.summary, summary_json(record, metrics).dump(2) + "\n");
  return files;
}

TrajectoryTable parse_trajectory_csv(std::string_view text) {
  struct Row {
    std::size_t step, agent;
    double opinion;
    std::optional<bool> active;
    std::optional<double> control, prob;
  };
  std::vector<Row> rows;
  std::size_t line_no = 0;
  std::size_t max_step = 0, max_agent = 0;
  bool any_prob = false;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "step,agent_id,opinion,active,control,actuation_prob") {
        throw std::runtime_error("trajectory line 1: unexpected header '" + line + "'");
      }
      continue;
    }
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) {
      throw std::runtime_error("trajectory line " + std::to_string(line_no) +
                               ": expected 6 columns, found " + std::to_string(f.size()));
    }
    Row r{parse_number<std::size_t>(f[0], line_no, "step"),
          parse_number<std::size_t>(f[1], line_no, "agent_id"),
          parse_number<double>(f[2], line_no, "opinion"), std::nullopt, std::nullopt,
          std::nullopt};
    if (!f[3].empty()) {
      if (f[3] != "0" && f[3] != "1") {
        throw std::runtime_error("trajectory line " + std::to_string(line_no) +
                                 ": bad active value '" + std::string(f[3]) + "'");
      }
      r.active = f[3] == "1";
    }
    if (!f[4].empty()) r.control = parse_number<double>(f[4], line_no, "control");
    if (!f[5].empty()) {
      r.prob = parse_number<double>(f[5], line_no, "actuation_prob");
      any_prob = true;
    }
    max_step = std::max(max_step, r.step);
    max_agent = std::max(max_agent, r.agent);
    rows.push_back(r);
  }
  if (rows.empty()) throw std::runtime_error("trajectory: no data rows");

  const auto steps = static_cast<Eigen::Index>(max_step + 1);
  const auto n = static_cast<Eigen::Index>(max_agent + 1);
  if (rows.size() != static_cast<std::size_t>(steps * n)) {
    throw std::runtime_error("trajectory: expected " + std::to_string(steps * n) +
                             " rows, found " + std::to_string(rows.size()));
  }
  TrajectoryTable out{RowMatrix(steps, n), RowMatrix::Zero(steps - 1, n),
                      MaskMatrix::Constant(steps - 1, n, false), std::nullopt};
  if (any_prob) out.probs = RowMatrix::Zero(steps - 1, n);
  for (const auto& r : rows) {
    const auto t = static_cast<Eigen::Index>(r.step);
    const auto i = static_cast<Eigen::Index>(r.agent);
    out.states(t, i) = r.opinion;
    if (t + 1 < steps) {
      if (!r.active || !r.control) {
        throw std::runtime_error("trajectory: step " + std::to_string(r.step) + " agent " +
                                 std::to_string(r.agent) + " lacks active/control");
      }
      out.indicators(t, i) = *r.active;
      out.controls(t, i) = *r.control;
      if (out.probs) {
        if (!r.prob) {
          throw std::runtime_error("trajectory: step " + std::to_string(r.step) +
                                   " agent " + std::to_string(r.agent) +
                                   " lacks actuation_prob");
        }
        (*out.probs)(t, i) = *r.prob;
      }
    }
  }
  return out;
}

TrajectoryTable read_trajectory(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_trajectory_csv(buf.str());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace opsteer
