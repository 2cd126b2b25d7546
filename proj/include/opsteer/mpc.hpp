#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "opsteer/dynamics.hpp"
#include "opsteer/optimizer.hpp"
#include "opsteer/policies.hpp"
#include "opsteer/random.hpp"
#include "opsteer/scenario.hpp"

namespace opsteer {

struct ExecutedStep {
  Vector controls;  // N, zero outside the execution set
  Mask indicators;  // N, execution actuation set
};

// Shifts the plan one timestep earlier and resets the last slot to the
// initial (zero) mean.
PolicyParams recede(const PolicyParams& means);

// Exactly floor(fraction * n) agents chosen uniformly without replacement.
Mask draw_active_set(std::size_t n, double fraction, Rng& rng);

// Draws N opinions from the scenario's mixture of uniform intervals.
Vector sample_initial_opinions(const Scenario& scenario, Rng& rng);

// Receding-horizon stochastic-search controller for the open-loop, feedback
// and adaptive-feedback policies. Every MPC step samples M rollouts from the
// current distribution, shapes their costs into weights, moves the Gaussian
// means (and for the adaptive policy the Bernoulli actuation probabilities),
// executes the first planned control and recedes the plan.
//
// Rollout m of step s draws all of its randomness from the substream
// (seed, kRollout, s * iterations + k, m), so results do not depend on the
// number of threads.
class StochasticSearchController {
 public:
  // `fixed_active_set` is required for the open-loop and feedback policies
  // and ignored by the adaptive one.
  StochasticSearchController(PolicyKind kind, const ControllerConfig& config,
                             const ModelParams& model, const CostSpec& cost,
                             double active_fraction, Mask fixed_active_set = {});

  ExecutedStep step(const PopulationState& current, std::uint64_t seed,
                    std::size_t step_index, std::size_t threads = 1);

  PolicyKind kind() const { return kind_; }
  const SamplerState& sampler() const { return sampler_; }
  const ControllerConfig& config() const { return config_; }

  // Probabilities after the most recent normalization, before clamping.
  const Vector& last_unclamped_probs() const { return last_unclamped_probs_; }
  // Costs of the most recent batch of rollouts.
  const std::vector<double>& last_costs() const { return last_costs_; }

 private:
  void optimize(const PopulationState& current, std::uint64_t seed,
                std::size_t round, std::size_t threads);
  double execution_control(const PopulationState& current, std::size_t i,
                           bool actuated) const;

  PolicyKind kind_;
  ControllerConfig config_;
  ModelParams model_;
  CostSpec cost_;
  Mask fixed_active_set_;
  std::vector<std::optional<std::size_t>> fixed_slots_;
  SamplerState sampler_;
  Vector last_unclamped_probs_;
  std::vector<double> last_costs_;
};

// Runs one full experiment: samples the initial population, then applies
// T_mpc control steps of the requested policy while the true population
// evolves under fresh environment noise. Baseline and uncontrolled runs
// never touch the optimizer.
ExperimentRecord run_controller(const Scenario& scenario, PolicyKind kind,
                                std::uint64_t seed, std::size_t threads = 1);

}  // namespace opsteer
