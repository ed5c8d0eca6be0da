#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfq/errors.hpp"
#include "mfq/model.hpp"
#include "mfq/numerics.hpp"
#include "mfq/params.hpp"

namespace mfq {

/// Self-consistent ensemble: every member plays the policy with parameters
/// psi against the ensemble's own empirical mean. One RngStream drives all
/// members in index order.
template <ModelFamily M>
class Ensemble {
 public:
  Ensemble(const M& model, std::vector<double> psi, int size, RngStream rng)
      : model_(&model), psi_(std::move(psi)), rng_(rng) {
    if (size < 1) throw ArgumentError("Ensemble: size must be >= 1");
    x_.resize(size);
    for (auto& v : x_) v = model.initial_state(rng_);
  }

  int size() const noexcept { return static_cast<int>(x_.size()); }
  std::span<const double> states() const noexcept { return x_; }

  double mean() const noexcept {
    double s = 0.0;
    for (double v : x_) s += v;
    return s / static_cast<double>(x_.size());
  }

  /// Advances every member from t to t + dt. Actions are only drawn when
  /// the noise lets them influence the state.
  void step(double t, double dt) {
    const double mu = mean();
    for (auto& xi : x_) {
      const Noise nz = model_->draw_noise(dt, rng_);
      double a = 0.0;
      if (model_->action_affects_state(nz)) a = model_->policy(psi_, t, xi, mu).sample(rng_);
      auto redraw = [&](double xm) { return model_->policy(psi_, t, xm, mu).sample(rng_); };
      xi = transition(*model_, t, xi, a, dt, nz, mu, redraw).x_next;
      if constexpr (M::needs_true_mean) {
        if (!(xi > 0.0)) throw RolloutError(-1, xi, a, "ensemble member left the positive half-line");
      }
      if (!std::isfinite(xi)) throw NumericError("ensemble state", "t=" + std::to_string(t));
    }
  }

 private:
  const M* model_;
  std::vector<double> psi_;
  RngStream rng_;
  std::vector<double> x_;
};

/// Empirical ensemble mean at every node k = 0..K.
template <ModelFamily M>
std::vector<double> env_true_mean(const M& model, std::span<const double> psi, const TimeGrid& grid, int size,
                                  RngStream rng) {
  Ensemble<M> ens(model, std::vector<double>(psi.begin(), psi.end()), size, rng);
  std::vector<double> out(grid.steps() + 1);
  out[0] = ens.mean();
  for (int k = 0; k < grid.steps(); ++k) {
    ens.step(grid.t(k), grid.dt());
    out[k + 1] = ens.mean();
  }
  return out;
}

}  // namespace mfq
