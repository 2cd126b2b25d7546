#include "opsteer/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace opsteer {
namespace {

Weights uniform_weights(std::size_t m) {
  return Weights::Constant(static_cast<Eigen::Index>(m),
                           1.0 / static_cast<double>(m));
}

Weights normalized(Weights w) {
  const double total = w.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::runtime_error("shape: weights do not normalize");
  }
  return w / total;
}

}  // namespace

void ShapeSpec::validate() const {
  if (kind == ShapeKind::kExponential && !(lambda > 0.0)) {
    throw std::invalid_argument("shape: lambda must be positive");
  }
  if (kind == ShapeKind::kSoftElite &&
      !(elite_fraction > 0.0 && elite_fraction < 1.0 && sharpness > 0.0)) {
    throw std::invalid_argument(
        "shape: elite_fraction must lie in (0, 1) and sharpness be positive");
  }
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

Weights shape_exponential(std::span<const double> costs, double lambda) {
  if (costs.empty()) throw std::invalid_argument("shape: no samples");
  if (!(lambda > 0.0)) throw std::invalid_argument("shape: lambda must be positive");
  double best = std::numeric_limits<double>::infinity();
  for (double j : costs) {
    if (std::isfinite(j)) best = std::min(best, j);
  }
  if (!std::isfinite(best)) {
    throw std::runtime_error("shape: all costs are non-finite");
  }
  Weights w(static_cast<Eigen::Index>(costs.size()));
  for (std::size_t m = 0; m < costs.size(); ++m) {
    w[static_cast<Eigen::Index>(m)] =
        std::isfinite(costs[m]) ? std::exp(-lambda * (costs[m] - best)) : 0.0;
  }
  return normalized(std::move(w));
}

double soft_elite_value(double y, double y_lb, double psi, double lambda) {
  return (y - y_lb) * logistic(lambda * (y - psi));
}

double empirical_quantile(std::span<const double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: no values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto below = static_cast<std::size_t>(std::floor(pos));
  const std::size_t above = std::min(below + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(below);
  return sorted[below] + frac * (sorted[above] - sorted[below]);
}

Weights shape_soft_elite(std::span<const double> costs, const ShapeSpec& spec) {
  const std::size_t m = costs.size();
  if (m < 2) throw std::invalid_argument("shape: soft elite needs >= 2 samples");
  for (double j : costs) {
    if (!std::isfinite(j)) throw std::runtime_error("shape: non-finite cost");
  }
  std::vector<double> y(m);
  std::transform(costs.begin(), costs.end(), y.begin(),
                 [](double j) { return -j; });

  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(m);
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  const double stddev = std::sqrt(var / static_cast<double>(m));
  if (stddev == 0.0) return uniform_weights(m);

  const double psi = empirical_quantile(y, 1.0 - spec.elite_fraction);
  const double y_lb = *std::min_element(y.begin(), y.end()) - kSoftEliteLowerMargin;
  const double lambda = spec.sharpness / (stddev + kSoftEliteStdFloor);

  Weights w(static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) {
    w[static_cast<Eigen::Index>(k)] = soft_elite_value(y[k], y_lb, psi, lambda);
  }
  return normalized(std::move(w));
}

Weights shape_weights(std::span<const double> costs, const ShapeSpec& spec) {
  switch (spec.kind) {
    case ShapeKind::kExponential:
      return shape_exponential(costs, spec.lambda);
    case ShapeKind::kSoftElite:
      return shape_soft_elite(costs, spec);
  }
  throw std::invalid_argument("shape: unknown kind");
}

PolicyParams gaussian_mean_update(const PolicyParams& means,
                                  std::span<const PolicyParams> samples,
                                  const Weights& weights, double beta) {
  if (samples.size() != static_cast<std::size_t>(weights.size())) {
    throw std::invalid_argument("mean update: sample/weight count mismatch");
  }
  RowMatrix direction = RowMatrix::Zero(means.values.rows(), means.values.cols());
  for (std::size_t m = 0; m < samples.size(); ++m) {
    const auto& phi = samples[m].values;
    if (phi.rows() != means.values.rows() || phi.cols() != means.values.cols()) {
      throw std::invalid_argument("mean update: sample layout mismatch");
    }
    direction += weights[static_cast<Eigen::Index>(m)] * (phi - means.values);
  }
  return PolicyParams{means.kind, means.values + beta * direction};
}

Vector bernoulli_update(const Vector& probs, const MaskMatrix& indicators,
                        const Weights& weights, double beta, double p_min) {
  const Eigen::Index n = probs.size();
  if (indicators.cols() != n || indicators.rows() != weights.size()) {
    throw std::invalid_argument("bernoulli update: dimension mismatch");
  }
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = probs[i];
    if (!(p > 0.0 && p < 1.0)) {
      throw std::invalid_argument("bernoulli update: probability must lie in (0, 1)");
    }
    double g = 0.0;
    for (Eigen::Index m = 0; m < weights.size(); ++m) {
      g += weights[m] * ((indicators(m, i) ? 1.0 : 0.0) - p);
    }
    out[i] = std::clamp(logistic(logit(p) + beta * g), p_min, 1.0 - p_min);
  }
  return out;
}

Vector rescale_to_fraction(const Vector& raw, double active_fraction,
                           std::size_t n_agents) {
  const double total = raw.sum();
  if (!(total > 0.0)) {
    throw std::runtime_error("normalize: probabilities sum to zero");
  }
  return raw * (active_fraction * static_cast<double>(n_agents) / total);
}

Vector normalize_actuation(const Vector& raw, double active_fraction,
                           std::size_t n_agents, double p_min) {
  return rescale_to_fraction(raw, active_fraction, n_agents)
      .cwiseMax(p_min)
      .cwiseMin(1.0 - p_min);
}

}  // namespace opsteer
