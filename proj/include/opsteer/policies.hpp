#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "opsteer/random.hpp"
#include "opsteer/types.hpp"

namespace opsteer {

enum class PolicyKind {
  kOpenLoop,
  kFeedback,
  kAdaptiveFeedback,
  kBaseline,
  kUncontrolled,
};

std::string_view to_string(PolicyKind kind);
std::optional<PolicyKind> parse_policy_kind(std::string_view name);

// True for the three parameterizations optimized by stochastic search.
bool is_stochastic_search(PolicyKind kind);

// Number of parameters per timestep. `n_slots` is |I_A| and only matters for
// the open-loop policy, which carries one feedforward per active agent.
std::size_t parameter_width(PolicyKind kind, std::size_t n_slots);

// One realization of a policy's parameters over the planning horizon, one
// row per timestep:
//   open loop          u = phi[t][slot]     columns: active-set slots
//   feedback           u = K[t] x + k[t]    columns: (K, k)
//   adaptive feedback  u = K[t] x           columns: (K)
// Feedback gains are shared by every actuated agent.
struct PolicyParams {
  PolicyKind kind = PolicyKind::kFeedback;
  RowMatrix values;

  std::size_t horizon() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t width() const { return static_cast<std::size_t>(values.cols()); }

  static PolicyParams zeros(PolicyKind kind, std::size_t horizon,
                            std::size_t n_slots = 0);
};

inline constexpr std::size_t kGainColumn = 0;
inline constexpr std::size_t kOffsetColumn = 1;

// Control for one agent at planning step t. Returns exactly 0 when the agent
// is not actuated. `slot` is the agent's position within the active set and
// is required for the open-loop policy only.
double eval_policy(const PolicyParams& params, double opinion,
                   std::optional<std::size_t> slot, std::size_t t,
                   bool actuated);

// Neighborhood-unaware pull toward the target: u = target - x.
inline double baseline_control(double opinion, double target) {
  return target - opinion;
}

// Distribution over policy parameters (and, for the adaptive policy, over the
// actuation set). The Gaussian has a fixed isotropic covariance; only the
// means move.
struct SamplerState {
  PolicyParams means;
  double sampling_std = 0.3;
  Vector actuation_probs;  // empty unless adaptive
  double active_fraction = 0.25;
  double p_min = 0.01;
};

// Draws every parameter independently from N(mean, sampling_std^2).
PolicyParams sample_policy_params(const SamplerState& sampler, Rng& rng);

// Independent Bernoulli(p_i) draws.
Mask sample_indicators(const Vector& probs, Rng& rng);

// Slot of each agent within `active` (its rank among the true entries), or
// nullopt for inactive agents.
std::vector<std::optional<std::size_t>> active_slots(const Mask& active);

}  // namespace opsteer
