#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "opsteer/policies.hpp"
#include "opsteer/random.hpp"
#include "opsteer/types.hpp"

namespace opsteer {

// Bounded-confidence opinion model with susceptibility alpha, additive
// Gaussian noise of standard deviation sigma and neighborhood radius epsilon.
struct ModelParams {
  double alpha = 0.8;
  double sigma = 0.1;
  double epsilon = 1.0;
  std::size_t n_agents = 200;
  double state_lo = -3.0;
  double state_hi = 3.0;
  std::size_t state_dim = 1;

  // Throws std::invalid_argument when an invariant is broken. Only scalar
  // opinions (state_dim == 1) are supported.
  void validate() const;
};

struct PopulationState {
  Vector opinions;
  Mask active_mask;  // true: agent belongs to the active set

  std::size_t size() const { return static_cast<std::size_t>(opinions.size()); }
};

// Quadratic steering cost: q |x - target|^2 per agent plus r |u|^2 per
// actuated agent, summed over t = 1..T.
struct CostSpec {
  double q = 5.0;
  double r = 0.1;
  double target = 0.0;

  void validate() const;
};

struct Rollout {
  RowMatrix states;    // (T+1) x N
  RowMatrix controls;  // T x N, zero for agents whose indicator is false
  Mask indicators;     // N
  double cost = 0.0;
};

// Agents j != i with |x_i - x_j| <= epsilon, in increasing index order.
std::vector<std::size_t> neighborhood(std::span<const double> opinions,
                                      std::size_t i, double epsilon);

// Mean opinion of the neighborhood of i; x_i itself when the neighborhood is
// empty.
double center_of_bias(std::span<const double> opinions, std::size_t i,
                      double epsilon);

// Sort-based neighborhood query for scalar opinions. Building costs one sort
// (near-linear when rebuilt from a similar population, since the previous
// order is reused) and then answers every agent's neighborhood with a
// two-pointer sweep and prefix sums.
class NeighborhoodIndex {
 public:
  NeighborhoodIndex() = default;
  NeighborhoodIndex(std::span<const double> opinions, double epsilon) {
    rebuild(opinions, epsilon);
  }

  void rebuild(std::span<const double> opinions, double epsilon);

  std::size_t size() const { return entries_.size(); }

  // Same set as neighborhood(opinions, i, epsilon), sorted by index.
  std::vector<std::size_t> neighbors(std::size_t i) const;
  std::size_t neighbor_count(std::size_t i) const;

  // Center of bias for every agent, written to out[i].
  void centers_of_bias(std::span<double> out) const;

 private:
  struct Entry {
    double value;
    std::size_t id;
  };

  std::vector<Entry> entries_;      // agents sorted by opinion
  std::vector<std::size_t> rank_;   // agent id -> position in entries_
  std::vector<double> prefix_;      // prefix_[k] = sum of values [0, k)
  std::vector<std::size_t> lo_;     // window [lo_, hi_) per sorted position
  std::vector<std::size_t> hi_;
};

// One propagation step. `noise` holds the additive perturbations sigma * w
// (already scaled). Controls of agents outside the active mask must be zero.
// The result is clipped into [state_lo, state_hi]; the mask passes through.
PopulationState step(const PopulationState& state,
                     std::span<const double> controls,
                     const ModelParams& params, std::span<const double> noise);

// Allocation-free variant used by rollouts: writes the next opinions into
// `next` given a prebuilt index over `current`.
void step_into(std::span<const double> current, const NeighborhoodIndex& index,
               std::span<const double> controls, const ModelParams& params,
               std::span<const double> noise, std::span<double> next);

// T x N matrix of additive noise sigma * w with w ~ N(0, 1).
RowMatrix draw_noise(const ModelParams& params, std::size_t horizon, Rng& rng);

// Propagates `horizon` steps from init, applying `policy` to agents whose
// indicator is true (others receive zero control), and accumulates the cost.
// For the open-loop policy, slots are assigned by rank among the indicators.
// `warm_start` may hold an index over a similar population (typically init)
// to speed up the first sort; results do not depend on it.
Rollout rollout(const PopulationState& init, const PolicyParams& policy,
                const Mask& indicators, const ModelParams& params,
                const CostSpec& cost, const RowMatrix& noise_stream,
                std::size_t horizon, NeighborhoodIndex warm_start = {});

}  // namespace opsteer
