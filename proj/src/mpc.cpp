#include "opsteer/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "opsteer/parallel.hpp"

namespace opsteer {

void ControllerConfig::validate() const {
  if (planning_horizon < 1 || mpc_horizon < 1) {
    throw std::invalid_argument("controller: horizons must be >= 1");
  }
  if (n_samples < 2) throw std::invalid_argument("controller: n_samples must be >= 2");
  if (!(step_size >= 0.0)) {
    throw std::invalid_argument("controller: step_size must be nonnegative");
  }
  if (iterations < 1) throw std::invalid_argument("controller: iterations must be >= 1");
  if (!(sampling_std > 0.0)) {
    throw std::invalid_argument("controller: sampling_std must be positive");
  }
  if (!(p_min > 0.0 && p_min < 0.5)) {
    throw std::invalid_argument("controller: p_min must lie in (0, 0.5)");
  }
  if (initial_probability &&
      !(*initial_probability > 0.0 && *initial_probability < 1.0)) {
    throw std::invalid_argument("controller: initial_probability must lie in (0, 1)");
  }
  shape.validate();
}

void Scenario::validate() const {
  model.validate();
  cost.validate();
  controller.validate();
  if (!(active_fraction > 0.0 && active_fraction <= 1.0)) {
    throw std::invalid_argument("scenario: active_fraction must lie in (0, 1]");
  }
  if (initial_distribution.empty()) {
    throw std::invalid_argument("scenario: initial distribution is empty");
  }
  double total = 0.0;
  for (const auto& c : initial_distribution) {
    if (!(c.weight > 0.0)) {
      throw std::invalid_argument("scenario: mixture weights must be positive");
    }
    if (!(c.lo <= c.hi) || c.lo < model.state_lo || c.hi > model.state_hi) {
      throw std::invalid_argument(
          "scenario: mixture intervals must satisfy lo <= hi inside the state bounds");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("scenario: mixture weights must sum to 1");
  }
  if (!(threshold > 0.0)) throw std::invalid_argument("scenario: threshold must be positive");
}

PolicyParams recede(const PolicyParams& means) {
  PolicyParams out{means.kind, RowMatrix::Zero(means.values.rows(), means.values.cols())};
  const Eigen::Index h = means.values.rows();
  if (h > 1) out.values.topRows(h - 1) = means.values.bottomRows(h - 1);
  return out;
}

Mask draw_active_set(std::size_t n, double fraction, Rng& rng) {
  const auto count = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(n) + 1e-9));
  // Partial Fisher-Yates; std::shuffle's draw pattern is unspecified.
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Mask mask = Mask::Constant(static_cast<Eigen::Index>(n), false);
  for (std::size_t k = 0; k < count; ++k) {
    const auto pick =
        k + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n - k));
    std::swap(ids[k], ids[std::min(pick, n - 1)]);
    mask[static_cast<Eigen::Index>(ids[k])] = true;
  }
  return mask;
}

Vector sample_initial_opinions(const Scenario& scenario, Rng& rng) {
  const std::size_t n = scenario.model.n_agents;
  const auto& mix = scenario.initial_distribution;
  std::vector<std::size_t> component(n);
  if (scenario.exact_mode_split) {
    // Largest-remainder allocation of agents to components, in order.
    std::size_t next = 0;
    double cumulative = 0.0;
    for (std::size_t c = 0; c < mix.size(); ++c) {
      cumulative += mix[c].weight;
      const auto end = c + 1 == mix.size()
                           ? n
                           : static_cast<std::size_t>(
                                 std::llround(cumulative * static_cast<double>(n)));
      for (; next < std::min(end, n); ++next) component[next] = c;
    }
  } else {
    for (auto& c : component) {
      double u = uniform01(rng);
      std::size_t k = 0;
      while (k + 1 < mix.size() && u >= mix[k].weight) {
        u -= mix[k].weight;
        ++k;
      }
      c = k;
    }
  }
  Vector x(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = mix[component[i]];
    x[static_cast<Eigen::Index>(i)] = c.lo + (c.hi - c.lo) * uniform01(rng);
  }
  return x;
}

StochasticSearchController::StochasticSearchController(
    PolicyKind kind, const ControllerConfig& config, const ModelParams& model,
    const CostSpec& cost, double active_fraction, Mask fixed_active_set)
    : kind_(kind),
      config_(config),
      model_(model),
      cost_(cost),
      fixed_active_set_(std::move(fixed_active_set)) {
  if (!is_stochastic_search(kind)) {
    throw std::invalid_argument("controller: policy '" +
                                std::string(to_string(kind)) +
                                "' is not optimized by stochastic search");
  }
  config_.validate();
  model_.validate();
  cost_.validate();

  const std::size_t n = model_.n_agents;
  std::size_t n_slots = 0;
  if (kind_ == PolicyKind::kAdaptiveFeedback) {
    fixed_active_set_ = Mask();
  } else {
    if (static_cast<std::size_t>(fixed_active_set_.size()) != n) {
      throw std::invalid_argument("controller: fixed active set has wrong size");
    }
    fixed_slots_ = active_slots(fixed_active_set_);
    n_slots = static_cast<std::size_t>(fixed_active_set_.count());
  }

  sampler_.means = PolicyParams::zeros(kind_, config_.planning_horizon, n_slots);
  sampler_.sampling_std = config_.sampling_std;
  sampler_.active_fraction = active_fraction;
  sampler_.p_min = config_.p_min;
  if (kind_ == PolicyKind::kAdaptiveFeedback) {
    const double p0 = std::clamp(config_.initial_probability.value_or(active_fraction),
                                 config_.p_min, 1.0 - config_.p_min);
    sampler_.actuation_probs = Vector::Constant(static_cast<Eigen::Index>(n), p0);
  }
}

void StochasticSearchController::optimize(const PopulationState& current,
                                          std::uint64_t seed, std::size_t round,
                                          std::size_t threads) {
  const std::size_t m_total = config_.n_samples;
  const std::size_t n = model_.n_agents;
  const std::size_t horizon = config_.planning_horizon;
  const bool adaptive = kind_ == PolicyKind::kAdaptiveFeedback;

  std::vector<PolicyParams> samples(m_total);
  MaskMatrix indicators(static_cast<Eigen::Index>(m_total),
                        static_cast<Eigen::Index>(n));
  last_costs_.assign(m_total, 0.0);
  const NeighborhoodIndex start_index(
      std::span<const double>(current.opinions.data(), n), model_.epsilon);

  parallel_for(m_total, threads, [&](std::size_t m) {
    Rng rng = make_substream(seed, StreamTag::kRollout, round, m);
    Mask active = adaptive ? sample_indicators(sampler_.actuation_probs, rng)
                           : fixed_active_set_;
    samples[m] = sample_policy_params(sampler_, rng);
    const RowMatrix noise = draw_noise(model_, horizon, rng);
    PopulationState start{current.opinions, active};
    last_costs_[m] =
        rollout(start, samples[m], active, model_, cost_, noise, horizon,
                start_index).cost;
    indicators.row(static_cast<Eigen::Index>(m)) = active.transpose();
  });

  const Weights weights = shape_weights(last_costs_, config_.shape);
  sampler_.means =
      gaussian_mean_update(sampler_.means, samples, weights, config_.step_size);
  if (adaptive) {
    const Vector raw = bernoulli_update(sampler_.actuation_probs, indicators,
                                        weights, config_.step_size, config_.p_min);
    last_unclamped_probs_ = rescale_to_fraction(raw, sampler_.active_fraction, n);
    sampler_.actuation_probs = last_unclamped_probs_.cwiseMax(config_.p_min)
                                   .cwiseMin(1.0 - config_.p_min);
  }
}

double StochasticSearchController::execution_control(
    const PopulationState& current, std::size_t i, bool actuated) const {
  const std::optional<std::size_t> slot =
      fixed_slots_.empty() ? std::nullopt : fixed_slots_[i];
  return eval_policy(sampler_.means, current.opinions[static_cast<Eigen::Index>(i)],
                     slot, 0, actuated);
}

ExecutedStep StochasticSearchController::step(const PopulationState& current,
                                              std::uint64_t seed,
                                              std::size_t step_index,
                                              std::size_t threads) {
  const std::size_t n = model_.n_agents;
  if (current.size() != n) throw std::invalid_argument("mpc step: population size mismatch");

  for (std::size_t k = 0; k < config_.iterations; ++k) {
    optimize(current, seed, step_index * config_.iterations + k, threads);
  }

  ExecutedStep out;
  if (kind_ == PolicyKind::kAdaptiveFeedback) {
    Rng rng = make_substream(seed, StreamTag::kExecution, step_index);
    out.indicators = sample_indicators(sampler_.actuation_probs, rng);
  } else {
    out.indicators = fixed_active_set_;
  }
  out.controls = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const bool on = out.indicators[static_cast<Eigen::Index>(i)];
    out.controls[static_cast<Eigen::Index>(i)] = execution_control(current, i, on);
  }
  sampler_.means = recede(sampler_.means);
  return out;
}

ExperimentRecord run_controller(const Scenario& scenario, PolicyKind kind,
                                std::uint64_t seed, std::size_t threads) {
  scenario.validate();
  const ModelParams& model = scenario.model;
  const std::size_t n = model.n_agents;
  const std::size_t steps = scenario.controller.mpc_horizon;
  const auto rows = static_cast<Eigen::Index>(steps);
  const auto cols = static_cast<Eigen::Index>(n);

  ExperimentRecord record;
  record.scenario = scenario;
  record.policy = kind;
  record.seed = seed;
  record.states = RowMatrix(rows + 1, cols);
  record.controls = RowMatrix::Zero(rows, cols);
  record.indicators = MaskMatrix::Constant(rows, cols, false);

  Rng init_rng = make_substream(seed, StreamTag::kInitialState);
  PopulationState state{sample_initial_opinions(scenario, init_rng),
                        Mask::Constant(cols, false)};
  record.states.row(0) = state.opinions.transpose();

  Mask fixed = Mask::Constant(cols, false);
  if (kind == PolicyKind::kOpenLoop || kind == PolicyKind::kFeedback ||
      kind == PolicyKind::kBaseline) {
    Rng active_rng = make_substream(seed, StreamTag::kActiveSet);
    fixed = draw_active_set(n, scenario.active_fraction, active_rng);
  }

  std::optional<StochasticSearchController> controller;
  if (is_stochastic_search(kind)) {
    controller.emplace(kind, scenario.controller, model, scenario.cost,
                       scenario.active_fraction, fixed);
  }
  if (kind == PolicyKind::kAdaptiveFeedback) record.probs = RowMatrix(rows, cols);

  for (std::size_t t = 0; t < steps; ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    ExecutedStep exec;
    if (controller) {
      exec = controller->step(state, seed, t, threads);
      if (record.probs) {
        record.probs->row(row) = controller->sampler().actuation_probs.transpose();
      }
    } else {
      exec.indicators = fixed;
      exec.controls = Vector::Zero(cols);
      if (kind == PolicyKind::kBaseline) {
        for (Eigen::Index i = 0; i < cols; ++i) {
          if (fixed[i]) {
            exec.controls[i] = baseline_control(state.opinions[i], scenario.target());
          }
        }
      }
    }

    Rng env_rng = make_substream(seed, StreamTag::kEnvironment, t);
    const RowMatrix noise = draw_noise(model, 1, env_rng);
    state.active_mask = exec.indicators;
    state = opsteer::step(state, std::span<const double>(exec.controls.data(), n),
                          model, std::span<const double>(noise.data(), n));

    record.controls.row(row) = exec.controls.transpose();
    record.indicators.row(row) = exec.indicators.transpose();
    record.states.row(row + 1) = state.opinions.transpose();
  }
  return record;
}

}  // namespace opsteer
