#include "opsteer/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/random/normal_distribution.hpp>

namespace opsteer {
namespace {

void require(bool condition, const char* message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace

void ModelParams::validate() const {
  require(alpha >= 0.0 && alpha <= 1.0, "model: alpha must lie in [0, 1]");
  require(sigma >= 0.0, "model: sigma must be nonnegative");
  require(epsilon > 0.0, "model: epsilon must be positive");
  require(n_agents >= 1, "model: n_agents must be at least 1");
  require(state_lo < state_hi, "model: state bounds must satisfy lo < hi");
  require(state_dim == 1, "model: only scalar opinions (state_dim = 1) are supported");
}

void CostSpec::validate() const {
  require(q >= 0.0 && r >= 0.0, "cost: q and r must be nonnegative");
}

std::vector<std::size_t> neighborhood(std::span<const double> opinions,
                                      std::size_t i, double epsilon) {
  if (i >= opinions.size()) {
    throw std::out_of_range("neighborhood: agent index out of range");
  }
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < opinions.size(); ++j) {
    if (j != i && std::abs(opinions[i] - opinions[j]) <= epsilon) {
      out.push_back(j);
    }
  }
  return out;
}

double center_of_bias(std::span<const double> opinions, std::size_t i,
                      double epsilon) {
  const auto members = neighborhood(opinions, i, epsilon);
  if (members.empty()) return opinions[i];
  double sum = 0.0;
  for (auto j : members) sum += opinions[j];
  return sum / static_cast<double>(members.size());
}

void NeighborhoodIndex::rebuild(std::span<const double> opinions,
                                double epsilon) {
  const std::size_t n = opinions.size();
  auto by_value = [](const Entry& a, const Entry& b) { return a.value < b.value; };
  if (entries_.size() == n) {
    // Populations drift slowly between steps, so the previous order is
    // usually close to sorted. Try insertion sort first and switch to a full
    // sort once it has moved too many entries.
    for (auto& e : entries_) e.value = opinions[e.id];
    std::size_t budget = 8 * n;
    for (std::size_t k = 1; k < n && budget > 0; ++k) {
      const Entry e = entries_[k];
      std::size_t pos = k;
      while (pos > 0 && e.value < entries_[pos - 1].value && budget > 0) {
        entries_[pos] = entries_[pos - 1];
        --pos;
        --budget;
      }
      entries_[pos] = e;
    }
    if (budget == 0) std::sort(entries_.begin(), entries_.end(), by_value);
  } else {
    entries_.resize(n);
    for (std::size_t k = 0; k < n; ++k) entries_[k] = {opinions[k], k};
    std::sort(entries_.begin(), entries_.end(), by_value);
  }

  rank_.resize(n);
  prefix_.resize(n + 1);
  lo_.resize(n);
  hi_.resize(n);
  prefix_[0] = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    rank_[entries_[k].id] = k;
    prefix_[k + 1] = prefix_[k] + entries_[k].value;
  }

  // Floating-point subtraction is monotone in each argument, so testing the
  // exact predicate |x_k - x_j| <= epsilon with two pointers reproduces the
  // brute-force neighborhood bit for bit.
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = entries_[k].value;
    while (v - entries_[lo].value > epsilon) ++lo;
    if (hi < k + 1) hi = k + 1;
    while (hi < n && entries_[hi].value - v <= epsilon) ++hi;
    lo_[k] = lo;
    hi_[k] = hi;
  }
}

std::vector<std::size_t> NeighborhoodIndex::neighbors(std::size_t i) const {
  if (i >= size()) {
    throw std::out_of_range("neighbors: agent index out of range");
  }
  const std::size_t k = rank_[i];
  std::vector<std::size_t> out;
  out.reserve(hi_[k] - lo_[k]);
  for (std::size_t s = lo_[k]; s < hi_[k]; ++s) {
    if (entries_[s].id != i) out.push_back(entries_[s].id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t NeighborhoodIndex::neighbor_count(std::size_t i) const {
  const std::size_t k = rank_.at(i);
  return hi_[k] - lo_[k] - 1;
}

void NeighborhoodIndex::centers_of_bias(std::span<double> out) const {
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const std::size_t count = hi_[k] - lo_[k] - 1;
    const double self = entries_[k].value;
    // A window of identical opinions must average back to that opinion
    // exactly, which the prefix-sum difference does not guarantee.
    const bool flat = entries_[lo_[k]].value == entries_[hi_[k] - 1].value;
    out[entries_[k].id] =
        count == 0 || flat ? self
                           : (prefix_[hi_[k]] - prefix_[lo_[k]] - self) /
                                 static_cast<double>(count);
  }
}

void step_into(std::span<const double> current, const NeighborhoodIndex& index,
               std::span<const double> controls, const ModelParams& params,
               std::span<const double> noise, std::span<double> next) {
  const std::size_t n = current.size();
  if (controls.size() != n || noise.size() != n || next.size() != n ||
      index.size() != n) {
    throw std::invalid_argument("step: dimension mismatch");
  }
  index.centers_of_bias(next);
  const double keep = 1.0 - params.alpha;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = next[i] == current[i]
                         ? current[i] + controls[i] + noise[i]
                         : keep * current[i] + params.alpha * next[i] +
                               controls[i] + noise[i];
    next[i] = std::clamp(x, params.state_lo, params.state_hi);
  }
}

PopulationState step(const PopulationState& state,
                     std::span<const double> controls,
                     const ModelParams& params, std::span<const double> noise) {
  const std::size_t n = state.size();
  if (static_cast<std::size_t>(state.active_mask.size()) != n) {
    throw std::invalid_argument("step: active mask size mismatch");
  }
  for (std::size_t i = 0; i < n && i < controls.size(); ++i) {
    if (!state.active_mask[static_cast<Eigen::Index>(i)] && controls[i] != 0.0) {
      throw std::invalid_argument("step: nonzero control on a passive agent");
    }
  }
  std::span<const double> current(state.opinions.data(), n);
  NeighborhoodIndex index(current, params.epsilon);
  PopulationState out{Vector(state.opinions.size()), state.active_mask};
  step_into(current, index, controls, params, noise,
            std::span<double>(out.opinions.data(), n));
  return out;
}

RowMatrix draw_noise(const ModelParams& params, std::size_t horizon, Rng& rng) {
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix out(static_cast<Eigen::Index>(horizon),
                static_cast<Eigen::Index>(params.n_agents));
  double* data = out.data();
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    data[k] = params.sigma * normal(rng);
  }
  return out;
}

Rollout rollout(const PopulationState& init, const PolicyParams& policy,
                const Mask& indicators, const ModelParams& params,
                const CostSpec& cost, const RowMatrix& noise_stream,
                std::size_t horizon, NeighborhoodIndex index) {
  const std::size_t n = init.size();
  if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
  if (static_cast<std::size_t>(indicators.size()) != n ||
      static_cast<std::size_t>(noise_stream.cols()) != n ||
      static_cast<std::size_t>(noise_stream.rows()) < horizon) {
    throw std::invalid_argument("rollout: dimension mismatch");
  }

  const auto h = static_cast<Eigen::Index>(horizon);
  const auto cols = static_cast<Eigen::Index>(n);
  Rollout out{RowMatrix(h + 1, cols), RowMatrix::Zero(h, cols), indicators, 0.0};
  out.states.row(0) = init.opinions.transpose();

  const auto slots = active_slots(indicators);
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    std::span<const double> current(&out.states(row, 0), n);
    std::span<double> control(&out.controls(row, 0), n);
    double control_cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!indicators[static_cast<Eigen::Index>(i)]) continue;
      control[i] = eval_policy(policy, current[i], slots[i], t, true);
      control_cost += control[i] * control[i];
    }

    index.rebuild(current, params.epsilon);
    std::span<double> next(&out.states(row + 1, 0), n);
    step_into(current, index, control, params,
              std::span<const double>(&noise_stream(row, 0), n), next);

    double state_cost = 0.0;
    for (double x : next) state_cost += (x - cost.target) * (x - cost.target);
    out.cost += cost.q * state_cost + cost.r * control_cost;
  }
  return out;
}

}  // namespace opsteer
