#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfq/errors.hpp"
#include "mfq/numerics.hpp"

namespace mfq {

/// Uniform grid t_k = k T / K on [0, T].
class TimeGrid {
 public:
  TimeGrid(double horizon, int steps) : T_(horizon), K_(steps) {
    if (steps < 1) throw ArgumentError("TimeGrid: K must be >= 1");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ArgumentError("TimeGrid: T must be positive");
    dt_ = horizon / steps;
  }

  double horizon() const noexcept { return T_; }
  int steps() const noexcept { return K_; }
  double dt() const noexcept { return dt_; }
  /// Node k; node K returns T exactly.
  double t(int k) const noexcept { return k == K_ ? T_ : k * dt_; }

  bool operator==(const TimeGrid&) const = default;

 private:
  double T_;
  int K_;
  double dt_;
};

/// Named real vector of learnable parameters.
struct ParamVec {
  std::vector<double> values;
  std::vector<std::string> names;

  ParamVec() = default;
  ParamVec(std::vector<double> v, std::vector<std::string> n) : values(std::move(v)), names(std::move(n)) {
    if (values.size() != names.size()) throw ArgumentError("ParamVec: values and names differ in length");
  }

  std::size_t size() const noexcept { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<const double> span() const noexcept { return values; }

  bool all_finite() const noexcept {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline std::vector<std::string> indexed_names(const std::string& stem, std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

/// Piecewise power law: value_i(j) = coef_i / j^exponent_i on the segment
/// with the largest start <= j. Episodes are 1-based.
class Schedule {
 public:
  struct Segment {
    int from = 1;
    std::vector<double> coef;
    std::vector<double> exponent;
    bool operator==(const Segment&) const = default;
  };

  Schedule() = default;
  explicit Schedule(std::vector<Segment> segments) : segments_(std::move(segments)) { validate(); }

  /// Same value for every component at all episodes.
  static Schedule constant(std::size_t dim, double value) {
    return Schedule({{1, std::vector<double>(dim, value), std::vector<double>(dim, 0.0)}});
  }

  /// Single segment with a shared coefficient and exponent.
  static Schedule power(std::size_t dim, double coef, double exponent) {
    return Schedule({{1, std::vector<double>(dim, coef), std::vector<double>(dim, exponent)}});
  }

  std::size_t dim() const noexcept { return segments_.empty() ? 0 : segments_.front().coef.size(); }
  const std::vector<Segment>& segments() const noexcept { return segments_; }

  std::vector<double> at(int j) const {
    if (j < 1) throw ArgumentError("Schedule: episode index is 1-based");
    const Segment* seg = &segments_.front();
    for (const auto& s : segments_)
      if (s.from <= j) seg = &s;
    std::vector<double> out(seg->coef.size());
    const double jj = static_cast<double>(j);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = seg->coef[i] / std::pow(jj, seg->exponent[i]);
    return out;
  }

  bool operator==(const Schedule&) const = default;

 private:
  void validate() const {
    if (segments_.empty()) throw ArgumentError("Schedule: need at least one segment");
    if (segments_.front().from != 1) throw ArgumentError("Schedule: first segment must start at episode 1");
    const std::size_t n = segments_.front().coef.size();
    int prev = 0;
    for (const auto& s : segments_) {
      if (s.from <= prev) throw ArgumentError("Schedule: thresholds must be strictly increasing");
      if (s.coef.size() != n || s.exponent.size() != n) throw ArgumentError("Schedule: inconsistent segment widths");
      for (double c : s.coef)
        if (!(c >= 0.0) || !std::isfinite(c)) throw ArgumentError("Schedule: coefficients must be finite and >= 0");
      for (double e : s.exponent)
        if (!std::isfinite(e)) throw ArgumentError("Schedule: exponents must be finite");
      prev = s.from;
    }
  }

  std::vector<Segment> segments_;
};

enum class TestPolicyMode { Literal, Centered };

inline std::string to_string(TestPolicyMode m) { return m == TestPolicyMode::Literal ? "literal" : "centered"; }

inline TestPolicyMode test_policy_mode_from_string(const std::string& s) {
  if (s == "literal") return TestPolicyMode::Literal;
  if (s == "centered") return TestPolicyMode::Centered;
  throw ArgumentError("unknown test-policy mode '" + s + "'");
}

/// Bounds p(j) <= q(j) of the uniform multiplier for test-policy parameters.
struct TestPolicyRule {
  Schedule lower;
  Schedule upper;
  TestPolicyMode mode = TestPolicyMode::Literal;

  bool operator==(const TestPolicyRule&) const = default;
};

/// Literal: psi_i * u_i. Centered: psi_i * (1 + u_i - (p_i + q_i) / 2).
/// u_i ~ U(p_i(j), q_i(j)).
inline std::vector<double> perturb_params(std::span<const double> psi, std::span<const double> u,
                                          std::span<const double> lo, std::span<const double> hi,
                                          TestPolicyMode mode) {
  std::vector<double> out(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i)
    out[i] = mode == TestPolicyMode::Literal ? psi[i] * u[i] : psi[i] * (1.0 + u[i] - 0.5 * (lo[i] + hi[i]));
  return out;
}

inline std::vector<double> draw_test_params(RngStream& rng, std::span<const double> psi, const TestPolicyRule& rule,
                                            int j) {
  const auto lo = rule.lower.at(j);
  const auto hi = rule.upper.at(j);
  if (lo.size() != psi.size() || hi.size() != psi.size())
    throw ArgumentError("draw_test_params: bound schedule width differs from psi");
  std::vector<double> u(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (lo[i] > hi[i]) throw ArgumentError("draw_test_params: lower bound exceeds upper bound");
    u[i] = lo[i] == hi[i] ? lo[i] : sample_uniform(rng, lo[i], hi[i]);
  }
  return perturb_params(psi, u, lo, hi, rule.mode);
}

}  // namespace mfq
