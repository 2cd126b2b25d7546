#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "opsteer/dynamics.hpp"
#include "opsteer/optimizer.hpp"
#include "opsteer/policies.hpp"
#include "opsteer/types.hpp"

namespace opsteer {

// Stochastic-search MPC settings.
struct ControllerConfig {
  std::size_t planning_horizon = 10;
  std::size_t mpc_horizon = 150;
  std::size_t n_samples = 500;
  double step_size = 1.0;
  std::size_t iterations = 1;  // optimizer iterations per MPC step
  double sampling_std = 0.3;
  ShapeSpec shape;
  // Initial actuation probability for the adaptive policy; the active
  // fraction is used when unset.
  std::optional<double> initial_probability;
  double p_min = 0.01;

  void validate() const;
};

struct UniformComponent {
  double lo = 0.0;
  double hi = 1.0;
  double weight = 1.0;
};

// Everything needed to run one experiment apart from policy and seed.
struct Scenario {
  std::string name;
  std::vector<UniformComponent> initial_distribution;
  ModelParams model;
  CostSpec cost;  // cost.target is the steering target
  double active_fraction = 0.25;
  // Assign agents to mixture components in exact proportion to the weights
  // instead of independently at random.
  bool exact_mode_split = false;
  double threshold = 0.2;  // convergence threshold for metrics
  ControllerConfig controller;

  double target() const { return cost.target; }
  void validate() const;
};

struct ExperimentRecord {
  Scenario scenario;
  PolicyKind policy = PolicyKind::kUncontrolled;
  std::uint64_t seed = 0;
  RowMatrix states;               // (T_mpc + 1) x N
  RowMatrix controls;             // T_mpc x N
  MaskMatrix indicators;          // T_mpc x N, execution actuation set
  std::optional<RowMatrix> probs; // T_mpc x N, adaptive policy only

  std::size_t n_steps() const { return static_cast<std::size_t>(controls.rows()); }
  std::size_t n_agents() const { return static_cast<std::size_t>(states.cols()); }
};

}  // namespace opsteer
