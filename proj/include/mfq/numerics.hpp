#pragma once

// Special functions, Gauss-Legendre quadrature and seedable samplers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "mfq/errors.hpp"

namespace mfq {

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// log Gamma(x) for x > 0. Lanczos (g = 7, 9 terms) with reflection below 1/2.
inline double ln_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("ln_gamma: argument must be positive and finite");
  static constexpr std::array<double, 9> kCoef = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    // Gamma(x) Gamma(1-x) = pi / sin(pi x)
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - ln_gamma(1.0 - x);
  }
  const double z = x - 1.0;
  double sum = kCoef[0];
  for (int i = 1; i < 9; ++i) sum += kCoef[i] / (z + i);
  const double t = z + 7.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(sum);
}

/// psi_0(x) = d/dx log Gamma(x) for x > 0.
inline double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("digamma: argument must be positive and finite");
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Asymptotic series with Bernoulli numbers B_2 .. B_14.
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 -
                                      inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 / 12))))));
  return result + std::log(x) - 0.5 * inv - series;
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendreRule(int n) : nodes(n), weights(n) {
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      nodes[i] = -z;
      nodes[n - 1 - i] = z;
      weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }
};

/// Shared, lazily built rule for n points (thread-safe; references stay valid).
inline const GaussLegendreRule& gauss_legendre(int n) {
  if (n < 2) throw ArgumentError("gauss_legendre: need at least 2 nodes");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussLegendreRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<GaussLegendreRule>(n);
  return *slot;
}

inline constexpr int kDefaultQuadratureNodes = 64;

/// Composite Gauss-Legendre: one n-point panel per unit length of [a, b]
/// (at least one panel).
template <class F>
double integrate(F&& f, double a, double b, int n = kDefaultQuadratureNodes) {
  if (n < 2) throw ArgumentError("integrate: need at least 2 nodes");
  if (!(a <= b)) throw ArgumentError("integrate: require a <= b");
  if (a == b) return 0.0;
  const auto& rule = gauss_legendre(n);
  const int panels = std::max(1, static_cast<int>(std::ceil(b - a - 1e-12)));
  const double width = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * width;
    const double mid = lo + 0.5 * width;
    double panel = 0.0;
    for (int i = 0; i < n; ++i) panel += rule.weights[i] * f(mid + 0.5 * width * rule.nodes[i]);
    total += 0.5 * width * panel;
  }
  return total;
}

/// Composite rule with an explicit panel count; used where the integrand is
/// sharply peaked and the unit-length heuristic is not enough.
template <class F>
double integrate_panels(F&& f, double a, double b, int panels, int n) {
  if (panels < 1 || n < 2) throw ArgumentError("integrate_panels: bad panel or node count");
  const auto& rule = gauss_legendre(n);
  const double width = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * width;
    double panel = 0.0;
    for (int i = 0; i < n; ++i) panel += rule.weights[i] * f(mid + 0.5 * width * rule.nodes[i]);
    total += 0.5 * width * panel;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds a tuple of indices (episode, test policy, purpose, ...) into one id.
inline constexpr std::uint64_t stream_id(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (auto p : parts) {
    std::uint64_t s = h ^ p;
    h = splitmix64(s) + 0x3c6ef372fe94f82bULL * (h >> 7);
  }
  return h;
}

/// xoshiro256** generator keyed by (seed, stream-id). Value type; copying a
/// stream duplicates its future sequence.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
    std::uint64_t sm = seed ^ (stream * 0xd1b54a32d192ed03ULL);
    sm = splitmix64(sm) ^ stream;
    for (auto& s : state_) s = splitmix64(sm);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal (Marsaglia polar method, spare cached).
  double standard_normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline double sample_normal(RngStream& rng, double mean, double std_dev) {
  if (!std::isfinite(mean) || !(std_dev > 0.0) || !std::isfinite(std_dev))
    throw DomainError("sample_normal: need finite mean and positive std");
  return mean + std_dev * rng.standard_normal();
}

/// Gamma(shape, rate) with density proportional to z^(shape-1) exp(-rate z).
/// Marsaglia-Tsang squeeze; shape < 1 via the U^(1/shape) boost.
inline double sample_gamma(RngStream& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate))
    throw DomainError("sample_gamma: shape and rate must be positive and finite");
  if (shape < 1.0) {
    const double boost = std::pow(rng.uniform(), 1.0 / shape);
    return sample_gamma(rng, shape + 1.0, rate) * boost;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.standard_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v / rate;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

/// Poisson(intensity): inversion below 10, Hormann's PTRS above.
inline std::int64_t sample_poisson(RngStream& rng, double intensity) {
  if (!(intensity >= 0.0) || !std::isfinite(intensity)) throw DomainError("sample_poisson: intensity must be finite and >= 0");
  if (intensity == 0.0) return 0;
  if (intensity < 10.0) {
    double p = std::exp(-intensity);
    double cdf = p;
    const double u = rng.uniform();
    std::int64_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= intensity / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  const double slam = std::sqrt(intensity);
  const double loglam = std::log(intensity);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const auto k = static_cast<std::int64_t>(std::floor((2.0 * a / us + b) * u + intensity + 0.43));
    if (us >= 0.07 && v <= vr) return k;
    if (k < 0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -intensity + static_cast<double>(k) * loglam - ln_gamma(static_cast<double>(k) + 1.0))
      return k;
  }
}

inline double sample_uniform(RngStream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

}  // namespace mfq
