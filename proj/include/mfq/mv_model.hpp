#pragma once

// Mean-variance portfolio selection with a jump-diffusion risky asset.
// MFG and MFC share value function, q-function and policy here.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mfq/errors.hpp"
#include "mfq/model.hpp"
#include "mfq/numerics.hpp"
#include "mfq/policy.hpp"

namespace mfq::mv {

struct MVEnvParams {
  double b = 0.25;
  double sigma = 0.5;
  double jump = 0.5;  // jump size Gamma
  double eta = 1.0;
  double lambda = 2.0;
  double gamma = 0.5;
  double beta = 0.0;
  double T = 1.0;
  double x0 = 1.0;
  double x0_sd = 0.0;

  void validate() const {
    if (!(sigma > 0.0)) throw ArgumentError("mv: sigma must be > 0");
    if (!(eta >= 0.0)) throw ArgumentError("mv: eta must be >= 0");
    if (!(lambda > 0.0)) throw ArgumentError("mv: lambda must be > 0");
    if (!(gamma > 0.0)) throw ArgumentError("mv: gamma must be > 0");
    if (!(T > 0.0)) throw ArgumentError("mv: T must be > 0");
    if (!(x0_sd >= 0.0)) throw ArgumentError("mv: x0_sd must be >= 0");
  }

  /// sigma^2 + eta Gamma^2
  double total_variance() const noexcept { return sigma * sigma + eta * jump * jump; }

  bool operator==(const MVEnvParams&) const = default;
};

struct MVTheta {
  double theta1, theta2;
};

/// Free components psi1..psi4; psi5 is always -psi2/psi4.
struct MVPsi {
  double psi1, psi2, psi3, psi4;
  double psi5() const noexcept { return -psi2 / psi4; }
};

inline MVTheta as_theta(std::span<const double> p) {
  if (p.size() != 2) throw ArgumentError("mv: theta has 2 components");
  return {p[0], p[1]};
}

inline MVPsi as_psi(std::span<const double> p) {
  if (p.size() != 4) throw ArgumentError("mv: psi has 4 free components");
  if (p[3] == 0.0) throw DomainError("mv: psi4 must be nonzero");
  return {p[0], p[1], p[2], p[3]};
}

inline StepResult mv_step_with(const MVEnvParams& env, double x, double a, double dt, const Noise& nz) {
  const double dx = a * env.b * dt + a * env.sigma * std::sqrt(dt) * nz.dW +
                    a * env.jump * (static_cast<double>(nz.dN) - env.eta * dt);
  return {x + dx, 0.0};
}

inline Noise mv_noise(const MVEnvParams& env, double dt, RngStream& rng) {
  Noise nz;
  nz.dW = rng.standard_normal();
  nz.dN = sample_poisson(rng, env.eta * dt);
  return nz;
}

inline StepResult mv_step(const MVEnvParams& env, double x, double a, RngStream& rng, double dt) {
  if (!(dt > 0.0)) throw ArgumentError("mv_step: dt must be > 0");
  return mv_step_with(env, x, a, dt, mv_noise(env, dt, rng));
}

inline double mv_terminal(double lambda, double x, double mu) { return x - lambda * (x - mu) * (x - mu); }

inline double mv_value(const MVTheta& th, double lambda, double gamma, double t, double x, double mu, double T) {
  const double tau = t - T;
  const double d = x - mu;
  return -lambda * std::exp(th.theta1 * tau) * d * d + x + 0.25 * gamma * th.theta1 * tau * tau + th.theta2 * tau +
         std::exp(-th.theta1 * tau) / (4.0 * lambda) - 1.0 / (4.0 * lambda);
}

inline std::array<double, 2> mv_grad_value(const MVTheta& th, double lambda, double gamma, double t, double x,
                                           double mu, double T) {
  const double tau = t - T;
  const double d = x - mu;
  return {-lambda * tau * std::exp(th.theta1 * tau) * d * d + 0.25 * gamma * tau * tau -
              tau * std::exp(-th.theta1 * tau) / (4.0 * lambda),
          tau};
}

/// E[a] under the Gaussian policy with parameters psi (the test policy's psi~).
inline double mv_action_moment(const MVPsi& ps, double t, double T) {
  return -ps.psi4 * std::exp(-ps.psi2 * (t - T));
}

inline double mv_q(const MVPsi& ps, double gamma, double t, double x, double mu, double a, double h, double T) {
  const double tau = t - T;
  const double d = x - mu;
  const double e = std::exp(ps.psi1 + ps.psi2 * tau);
  const double s = a + ps.psi3 * d + ps.psi4 * std::exp(-ps.psi2 * tau);
  return -0.5 * e * s * s - 0.5 * gamma * std::log(2.0 * std::numbers::pi * gamma) + 0.5 * gamma * ps.psi1 +
         0.5 * ps.psi2 * gamma * tau - ps.psi2 * d + ps.psi5() * std::exp(ps.psi2 * tau) * d * h;
}

/// Gradient in the free components; psi5(psi2, psi4) is differentiated
/// through. The moment h is held fixed.
inline std::array<double, 4> mv_grad_q(const MVPsi& ps, double gamma, double t, double x, double mu, double a,
                                       double h, double T) {
  const double tau = t - T;
  const double d = x - mu;
  const double e = std::exp(ps.psi1 + ps.psi2 * tau);
  const double em = std::exp(-ps.psi2 * tau);
  const double ep = std::exp(ps.psi2 * tau);
  const double s = a + ps.psi3 * d + ps.psi4 * em;
  const double mf = ep * d * h;
  return {
      -0.5 * e * s * s + 0.5 * gamma,
      -0.5 * e * tau * s * s + e * s * ps.psi4 * tau * em + 0.5 * gamma * tau - d - mf / ps.psi4 +
          ps.psi5() * tau * mf,
      -e * s * d,
      -e * s * em + ps.psi2 / (ps.psi4 * ps.psi4) * mf,
  };
}

inline GaussianPolicy mv_policy(const MVPsi& ps, double gamma, double t, double x, double mu, double T) {
  const double tau = t - T;
  return {-ps.psi3 * (x - mu) - ps.psi4 * std::exp(-ps.psi2 * tau), gamma * std::exp(-ps.psi1 - ps.psi2 * tau)};
}

struct MVTrueParams {
  MVTheta theta;
  MVPsi psi;
};

inline MVTrueParams mv_true_params(const MVEnvParams& env) {
  const double v = env.total_variance();
  const double kappa = env.b * env.b / v;
  const double th2 = -0.5 * env.gamma * std::log(std::numbers::pi * env.gamma / (v * env.lambda));
  return {{kappa, th2}, {std::log(2.0 * env.lambda * v), kappa, env.b / v, -env.b / (2.0 * env.lambda * v)}};
}

class MVModel {
 public:
  static constexpr bool needs_true_mean = false;
  static constexpr const char* id = "mv";

  explicit MVModel(MVEnvParams env = {}) : env_(env) { env_.validate(); }

  const MVEnvParams& env() const noexcept { return env_; }

  std::size_t theta_dim() const noexcept { return 2; }
  std::size_t psi_dim() const noexcept { return 4; }
  std::vector<std::string> theta_names() const { return {"theta1", "theta2"}; }
  std::vector<std::string> psi_names() const { return {"psi1", "psi2", "psi3", "psi4"}; }
  double horizon() const noexcept { return env_.T; }
  double temperature() const noexcept { return env_.gamma; }
  double discount() const noexcept { return env_.beta; }

  double value(std::span<const double> th, double t, double x, double mu) const {
    return mv_value(as_theta(th), env_.lambda, env_.gamma, t, x, mu, env_.T);
  }
  void value_grad(std::span<const double> th, double t, double x, double mu, std::span<double> out) const {
    const auto g = mv_grad_value(as_theta(th), env_.lambda, env_.gamma, t, x, mu, env_.T);
    out[0] = g[0];
    out[1] = g[1];
  }
  double q(std::span<const double> ps, double t, double x, double mu, double a, double h) const {
    return mv_q(as_psi(ps), env_.gamma, t, x, mu, a, h, env_.T);
  }
  void q_grad(std::span<const double> ps, double t, double x, double mu, double a, double h,
              std::span<double> out) const {
    const auto g = mv_grad_q(as_psi(ps), env_.gamma, t, x, mu, a, h, env_.T);
    for (int i = 0; i < 4; ++i) out[i] = g[i];
  }
  GaussianPolicy policy(std::span<const double> ps, double t, double x, double mu) const {
    return mv_policy(as_psi(ps), env_.gamma, t, x, mu, env_.T);
  }
  double mf_moment(std::span<const double> ps, double t, double /*mu*/) const {
    return mv_action_moment(as_psi(ps), t, env_.T);
  }

  Noise draw_noise(double dt, RngStream& rng) const { return mv_noise(env_, dt, rng); }
  StepResult step_with(double /*t*/, double x, double a, double dt, const Noise& nz, double /*mu_true*/) const {
    return mv_step_with(env_, x, a, dt, nz);
  }
  bool action_affects_state(const Noise& /*nz*/) const noexcept { return true; }
  double terminal(double x, double mu) const noexcept { return mv_terminal(env_.lambda, x, mu); }
  double initial_state(RngStream& rng) const {
    return env_.x0_sd > 0.0 ? sample_normal(rng, env_.x0, env_.x0_sd) : env_.x0;
  }
  double initial_mean() const noexcept { return env_.x0; }

  std::vector<double> true_theta() const {
    const auto tp = mv_true_params(env_);
    return {tp.theta.theta1, tp.theta.theta2};
  }
  std::vector<double> true_psi() const {
    const auto tp = mv_true_params(env_);
    return {tp.psi.psi1, tp.psi.psi2, tp.psi.psi3, tp.psi.psi4};
  }

 private:
  MVEnvParams env_;
};

static_assert(ModelFamily<MVModel>);

}  // namespace mfq::mv
