#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfq/numerics.hpp"

namespace mfq {

/// Exogenous randomness of one simulator step.
struct Noise {
  double dW = 0.0;
  std::int64_t dN = 0;
};

struct StepResult {
  double x_next;
  double reward;
};

template <class P>
concept PolicyDistribution = requires(const P& p, RngStream& rng, double a) {
  { p.mean() } -> std::convertible_to<double>;
  { p.variance() } -> std::convertible_to<double>;
  { p.sample(rng) } -> std::convertible_to<double>;
  { p.log_density(a) } -> std::convertible_to<double>;
  { p.entropy() } -> std::convertible_to<double>;
};

/// What the trainer, evaluators and oracles need from a concrete model.
/// Parameter vectors are passed as spans of the free components; derived
/// components (such as the MV psi5) are recomputed inside the model.
template <class M>
concept ModelFamily = requires(const M& m, std::span<const double> p, std::span<double> out, double t, double x,
                               double mu, double a, double h, double dt, RngStream& rng, const Noise& nz) {
  { m.theta_dim() } -> std::convertible_to<std::size_t>;
  { m.psi_dim() } -> std::convertible_to<std::size_t>;
  { m.theta_names() } -> std::convertible_to<std::vector<std::string>>;
  { m.psi_names() } -> std::convertible_to<std::vector<std::string>>;
  { m.horizon() } -> std::convertible_to<double>;
  { m.temperature() } -> std::convertible_to<double>;
  { m.discount() } -> std::convertible_to<double>;

  { m.value(p, t, x, mu) } -> std::convertible_to<double>;
  m.value_grad(p, t, x, mu, out);
  { m.q(p, t, x, mu, a, h) } -> std::convertible_to<double>;
  m.q_grad(p, t, x, mu, a, h, out);
  { m.policy(p, t, x, mu) } -> PolicyDistribution;
  { m.mf_moment(p, t, mu) } -> std::convertible_to<double>;

  { m.draw_noise(dt, rng) } -> std::same_as<Noise>;
  { m.step_with(t, x, a, dt, nz, mu) } -> std::same_as<StepResult>;
  { m.terminal(x, mu) } -> std::convertible_to<double>;
  { m.action_affects_state(nz) } -> std::convertible_to<bool>;
  { m.initial_state(rng) } -> std::convertible_to<double>;
  { m.initial_mean() } -> std::convertible_to<double>;
  { m.true_theta() } -> std::convertible_to<std::vector<double>>;
  { m.true_psi() } -> std::convertible_to<std::vector<double>>;
  { M::needs_true_mean } -> std::convertible_to<bool>;
  { M::id } -> std::convertible_to<const char*>;
};

/// Transition that lets models with multi-jump steps redraw the action at
/// intermediate states; redraw(x_mid) -> a.
template <ModelFamily M, class Redraw>
StepResult transition(const M& model, double t, double x, double a, double dt, const Noise& nz, double mu_true,
                      Redraw&& redraw) {
  if constexpr (requires { model.step_with(t, x, a, dt, nz, mu_true, redraw); })
    return model.step_with(t, x, a, dt, nz, mu_true, redraw);
  else
    return model.step_with(t, x, a, dt, nz, mu_true);
}

/// One full simulator step: draw noise, then transition.
template <ModelFamily M>
StepResult model_step(const M& model, double t, double x, double a, double dt, double mu_true, RngStream& rng) {
  const Noise nz = model.draw_noise(dt, rng);
  return model.step_with(t, x, a, dt, nz, mu_true);
}

}  // namespace mfq
