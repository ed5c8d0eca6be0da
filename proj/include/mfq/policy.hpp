#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfq/errors.hpp"
#include "mfq/numerics.hpp"

namespace mfq {

struct GaussianPolicy {
  double mu;
  double var;

  double mean() const noexcept { return mu; }
  double variance() const noexcept { return var; }
  double sample(RngStream& rng) const { return sample_normal(rng, mu, std::sqrt(var)); }
  double log_density(double a) const noexcept {
    const double d = a - mu;
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * d * d / var;
  }
  double entropy() const noexcept { return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * var); }
  /// Support used for numerical integration over actions.
  double lower() const noexcept { return mu - 12.0 * std::sqrt(var); }
  double upper() const noexcept { return mu + 12.0 * std::sqrt(var); }
};

/// a = Z - 1 with Z ~ Gamma(shape, rate); support (-1, inf).
struct ShiftedGammaPolicy {
  double shape;
  double rate;

  double mean() const noexcept { return shape / rate - 1.0; }
  double variance() const noexcept { return shape / (rate * rate); }
  /// Draws below 2^-53 would round to a = -1; they are clamped just above it.
  double sample(RngStream& rng) const {
    return std::max(sample_gamma(rng, shape, rate) - 1.0, std::nextafter(-1.0, 0.0));
  }
  double log_density(double a) const {
    const double u = 1.0 + a;
    if (!(u > 0.0)) throw DomainError("ShiftedGammaPolicy: action must exceed -1");
    return shape * std::log(rate) - ln_gamma(shape) + (shape - 1.0) * std::log(u) - rate * u;
  }
  double entropy() const { return shape - std::log(rate) + ln_gamma(shape) + (1.0 - shape) * digamma(shape); }
};

}  // namespace mfq
