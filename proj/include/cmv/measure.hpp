#pragma once

// Weighted empirical measures on R^n and the log-weight normalization the
// particle system relies on. Measures are stored already normalized; raw
// likelihoods exist only as log-weights on the simulation side.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmv {

/// log(sum_i exp(z_i)) without overflow. Requires finite inputs.
inline double logsumexp(std::span<const double> z) {
  if (z.empty()) throw std::invalid_argument("logsumexp: empty input");
  double zmax = z[0];
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i]))
      throw std::invalid_argument("logsumexp: non-finite input at index " + std::to_string(i));
    if (z[i] > zmax) zmax = z[i];
  }
  double s = 0.0;
  for (const double v : z) s += std::exp(v - zmax);
  return zmax + std::log(s);
}

/// w_i = exp(z_i - max z) / sum_j exp(z_j - max z). Invariant under common
/// shifts of z; equal inputs give exactly 1/N per component.
inline std::vector<double> normalize_log_weights(std::span<const double> z) {
  if (z.empty()) throw std::invalid_argument("normalize_log_weights: empty input");
  double zmax = z[0];
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i]))
      throw std::invalid_argument("normalize_log_weights: non-finite log-weight at index " +
                                  std::to_string(i));
    if (z[i] > zmax) zmax = z[i];
  }
  std::vector<double> w(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    w[i] = std::exp(z[i] - zmax);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

/// Finite measure sum_i w_i delta_{x_i} with strictly positive weights
/// summing to 1. Positions are packed row-major, atom i at [i*dim, (i+1)*dim).
class WeightedEmpiricalMeasure {
 public:
  WeightedEmpiricalMeasure(std::size_t dim, std::vector<double> positions,
                           std::vector<double> weights)
      : dim_(dim), positions_(std::move(positions)), weights_(std::move(weights)) {
    if (dim_ == 0) throw std::invalid_argument("measure: dimension must be positive");
    if (weights_.empty()) throw std::invalid_argument("measure: needs at least one atom");
    if (positions_.size() != weights_.size() * dim_)
      throw std::invalid_argument("measure: positions size does not match atoms * dim");
    double s = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (!(weights_[i] > 0.0))
        throw std::invalid_argument("measure: weight " + std::to_string(i) +
                                    " is not strictly positive");
      s += weights_[i];
    }
    if (std::abs(s - 1.0) > 1e-12)
      throw std::invalid_argument("measure: weights sum to " + std::to_string(s) +
                                  ", expected 1");
    for (const double p : positions_) {
      if (!std::isfinite(p)) throw std::invalid_argument("measure: non-finite atom position");
    }
  }

  std::size_t size() const { return weights_.size(); }
  std::size_t dim() const { return dim_; }
  std::span<const double> position(std::size_t i) const {
    return {positions_.data() + i * dim_, dim_};
  }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& positions() const { return positions_; }

 private:
  std::size_t dim_;
  std::vector<double> positions_;
  std::vector<double> weights_;
};

/// Mean of the identity map: sum_i w_i x_i, one entry per coordinate.
inline std::vector<double> integrate_linear(const WeightedEmpiricalMeasure& mu) {
  std::vector<double> out(mu.dim(), 0.0);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto x = mu.position(i);
    const double w = mu.weight(i);
    for (std::size_t c = 0; c < mu.dim(); ++c) out[c] += w * x[c];
  }
  return out;
}

}  // namespace cmv
