#include "opsteer/policies.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/random/normal_distribution.hpp>

namespace opsteer {
namespace {

constexpr std::array<std::pair<PolicyKind, std::string_view>, 5> kNames{{
    {PolicyKind::kOpenLoop, "open_loop"},
    {PolicyKind::kFeedback, "feedback"},
    {PolicyKind::kAdaptiveFeedback, "adaptive"},
    {PolicyKind::kBaseline, "baseline"},
    {PolicyKind::kUncontrolled, "uncontrolled"},
}};

}  // namespace

std::string_view to_string(PolicyKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<PolicyKind> parse_policy_kind(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

bool is_stochastic_search(PolicyKind kind) {
  return kind == PolicyKind::kOpenLoop || kind == PolicyKind::kFeedback ||
         kind == PolicyKind::kAdaptiveFeedback;
}

std::size_t parameter_width(PolicyKind kind, std::size_t n_slots) {
  switch (kind) {
    case PolicyKind::kOpenLoop:
      return n_slots;
    case PolicyKind::kFeedback:
      return 2;
    case PolicyKind::kAdaptiveFeedback:
      return 1;
    default:
      return 0;
  }
}

PolicyParams PolicyParams::zeros(PolicyKind kind, std::size_t horizon,
                                 std::size_t n_slots) {
  if (!is_stochastic_search(kind)) {
    throw std::invalid_argument("policy '" + std::string(to_string(kind)) +
                                "' has no sampled parameters");
  }
  const auto width = parameter_width(kind, n_slots);
  return PolicyParams{kind, RowMatrix::Zero(static_cast<Eigen::Index>(horizon),
                                            static_cast<Eigen::Index>(width))};
}

double eval_policy(const PolicyParams& params, double opinion,
                   std::optional<std::size_t> slot, std::size_t t,
                   bool actuated) {
  if (!actuated) return 0.0;
  if (t >= params.horizon()) {
    throw std::out_of_range("eval_policy: timestep beyond planning horizon");
  }
  const auto row = static_cast<Eigen::Index>(t);
  switch (params.kind) {
    case PolicyKind::kOpenLoop:
      if (!slot || *slot >= params.width()) {
        throw std::invalid_argument(
            "eval_policy: open-loop agent has no feedforward slot");
      }
      return params.values(row, static_cast<Eigen::Index>(*slot));
    case PolicyKind::kFeedback:
      return params.values(row, kGainColumn) * opinion +
             params.values(row, kOffsetColumn);
    case PolicyKind::kAdaptiveFeedback:
      return params.values(row, kGainColumn) * opinion;
    default:
      throw std::invalid_argument("eval_policy: not a parameterized policy");
  }
}

PolicyParams sample_policy_params(const SamplerState& sampler, Rng& rng) {
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  PolicyParams out{sampler.means.kind, sampler.means.values};
  double* data = out.values.data();
  for (Eigen::Index k = 0; k < out.values.size(); ++k) {
    data[k] += sampler.sampling_std * normal(rng);
  }
  return out;
}

Mask sample_indicators(const Vector& probs, Rng& rng) {
  Mask out(probs.size());
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    out[i] = uniform01(rng) < probs[i];
  }
  return out;
}

std::vector<std::optional<std::size_t>> active_slots(const Mask& active) {
  std::vector<std::optional<std::size_t>> slots(
      static_cast<std::size_t>(active.size()));
  std::size_t next = 0;
  for (Eigen::Index i = 0; i < active.size(); ++i) {
    if (active[i]) slots[static_cast<std::size_t>(i)] = next++;
  }
  return slots;
}

}  // namespace opsteer
