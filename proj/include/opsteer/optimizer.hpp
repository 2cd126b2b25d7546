#pragma once

#include <cstddef>
#include <span>

#include "opsteer/policies.hpp"
#include "opsteer/types.hpp"

namespace opsteer {

enum class ShapeKind { kExponential, kSoftElite };

// Shape function applied to y = -J before weighting samples.
//
// Exponential: S(y) = exp(lambda * y), which yields MPPI-style softmax
// weights.
//
// SoftElite: S(y) = (y - y_lb) * sigmoid(lambda * (y - psi)), a smoothed
// elite cut. psi, y_lb and lambda are recomputed from every batch:
//   psi    = empirical (1 - elite_fraction) quantile of y
//   y_lb   = min(y) - 1e-6
//   lambda = sharpness / (std(y) + 1e-12)
struct ShapeSpec {
  ShapeKind kind = ShapeKind::kSoftElite;
  double lambda = 1.0;           // exponential only
  double elite_fraction = 0.1;   // soft elite only
  double sharpness = 10.0;       // soft elite only

  void validate() const;
};

inline constexpr double kSoftEliteLowerMargin = 1e-6;
inline constexpr double kSoftEliteStdFloor = 1e-12;

// Normalized nonnegative weights, one per sample.
using Weights = Vector;

Weights shape_exponential(std::span<const double> costs, double lambda);
Weights shape_soft_elite(std::span<const double> costs, const ShapeSpec& spec);
Weights shape_weights(std::span<const double> costs, const ShapeSpec& spec);

// Unnormalized sigmoid shape value, exposed for tests and diagnostics.
double soft_elite_value(double y, double y_lb, double psi, double lambda);

// Linear-interpolation empirical quantile (type 7), q in [0, 1].
double empirical_quantile(std::span<const double> values, double q);

// mu_t <- mu_t + beta * sum_m w_m (phi_t^m - mu_t), elementwise.
PolicyParams gaussian_mean_update(const PolicyParams& means,
                                  std::span<const PolicyParams> samples,
                                  const Weights& weights, double beta);

// Natural-gradient step for independent Bernoulli actuation probabilities:
// g_i = sum_m w_m (a_i^m - p_i), logit(p_i') = logit(p_i) + beta * g_i,
// then clamped into [p_min, 1 - p_min]. indicators is M x N.
Vector bernoulli_update(const Vector& probs, const MaskMatrix& indicators,
                        const Weights& weights, double beta, double p_min);

// p_i = xi * N * raw_i / sum_j raw_j, without clamping.
Vector rescale_to_fraction(const Vector& raw, double active_fraction,
                           std::size_t n_agents);

// rescale_to_fraction followed by clamping into [p_min, 1 - p_min].
Vector normalize_actuation(const Vector& raw, double active_fraction,
                           std::size_t n_agents, double p_min);

// Score functions d/d(eta) ln p(x; eta) = T(x) - E[T(x)] in natural
// coordinates. Gaussian with fixed std: eta = mu / std, T(phi) = phi / std.
// Bernoulli: eta = logit(p), T(a) = a.
inline double gaussian_score(double phi, double mean, double stddev) {
  return (phi - mean) / stddev;
}
inline double bernoulli_score(double a, double p) { return a - p; }

double logistic(double z);
double logit(double p);

}  // namespace opsteer
