#pragma once

// Multiplicative jump control with a relative-performance cost: MFG and
// MFC families with Gamma policies and log-Gamma value terms.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mfq/errors.hpp"
#include "mfq/model.hpp"
#include "mfq/numerics.hpp"
#include "mfq/policy.hpp"

namespace mfq::jump {

struct JumpEnvParams {
  double eta = 1.5;
  double sigma = 0.5;
  double r0 = 1.0;
  double gamma = 0.5;
  double T = 1.0;
  double x0 = 1.0;
  double x0_log_sd = 0.0;  // initial state x0 * exp(sd Z - sd^2 / 2)
  int ensemble_size = 1000;

  void validate() const {
    if (!(gamma > 0.0)) throw ArgumentError("jump: gamma must be > 0");
    if (!(r0 >= gamma)) throw ArgumentError("jump: require r0 >= gamma");
    if (!(sigma > 0.0)) throw ArgumentError("jump: sigma must be > 0");
    if (!(eta > 0.0)) throw ArgumentError("jump: eta must be > 0");
    if (!(T > 0.0)) throw ArgumentError("jump: T must be > 0");
    if (!(x0 > 0.0)) throw ArgumentError("jump: x0 must be > 0");
    if (!(x0_log_sd >= 0.0)) throw ArgumentError("jump: x0_log_sd must be >= 0");
    if (ensemble_size < 1) throw ArgumentError("jump: ensemble_size must be >= 1");
  }

  bool operator==(const JumpEnvParams&) const = default;
};

// ---------------------------------------------------------------------------
// Simulator
// ---------------------------------------------------------------------------

inline Noise jump_noise(const JumpEnvParams& env, double dt, RngStream& rng) {
  Noise nz;
  nz.dW = rng.standard_normal();
  nz.dN = sample_poisson(rng, env.eta * dt);
  return nz;
}

inline StepResult jump_step_with(const JumpEnvParams& env, double x, double a, double dt, const Noise& nz,
                                 double mu_true) {
  if (!(a > -1.0)) throw DomainError("jump_step: action must exceed -1");
  if (!(x > 0.0)) throw DomainError("jump_step: state must be positive");
  if (!(mu_true > 0.0)) throw DomainError("jump_step: population mean must be positive");
  const double diffusion = std::exp(env.sigma * std::sqrt(dt) * nz.dW - 0.5 * env.sigma * env.sigma * dt);
  const double jump = nz.dN == 0 ? 1.0 : std::pow(1.0 + a, static_cast<double>(nz.dN));
  return {x * jump * diffusion, -env.r0 * (1.0 + a) * x / mu_true};
}

/// As jump_step_with, but each jump after the first in one step uses a fresh
/// action redraw(x_mid) at the post-jump state instead of repeating a.
template <class Redraw>
StepResult jump_step_sequential(const JumpEnvParams& env, double x, double a, double dt, const Noise& nz,
                                double mu_true, Redraw&& redraw) {
  if (nz.dN < 2) return jump_step_with(env, x, a, dt, nz, mu_true);
  StepResult first = jump_step_with(env, x, a, dt, Noise{0.0, 1}, mu_true);
  double xm = x * (1.0 + a);
  for (std::int64_t n = 1; n < nz.dN; ++n) {
    const double an = redraw(xm);
    if (!(an > -1.0)) throw DomainError("jump_step: action must exceed -1");
    xm *= 1.0 + an;
  }
  first.x_next = xm * std::exp(env.sigma * std::sqrt(dt) * nz.dW - 0.5 * env.sigma * env.sigma * dt);
  return first;
}

inline StepResult jump_step(const JumpEnvParams& env, double x, double a, RngStream& rng, double dt,
                            double mu_true) {
  if (!(dt > 0.0)) throw ArgumentError("jump_step: dt must be > 0");
  return jump_step_with(env, x, a, dt, jump_noise(env, dt, rng), mu_true);
}

// ---------------------------------------------------------------------------
// Time integrals of log Gamma(exp(slope (s - T) + offset)) over [t, T]
// ---------------------------------------------------------------------------

struct LogGammaIntegrals {
  double value;      // int lnG(e^w) ds
  double d_slope;    // d/d slope
  double d_offset;   // d/d offset
};

namespace detail {

struct IntegralKey {
  double slope, offset, t, T;
  bool operator==(const IntegralKey&) const = default;
};

struct IntegralKeyHash {
  std::size_t operator()(const IntegralKey& k) const noexcept {
    std::hash<double> h;
    std::size_t s = h(k.slope);
    s = s * 1000003u ^ h(k.offset);
    s = s * 1000003u ^ h(k.t);
    return s * 1000003u ^ h(k.T);
  }
};

inline LogGammaIntegrals compute_log_gamma_integrals(double slope, double offset, double t, double T) {
  if (t >= T) return {0.0, 0.0, 0.0};
  LogGammaIntegrals out{};
  out.value = integrate([&](double s) { return ln_gamma(std::exp(slope * (s - T) + offset)); }, t, T);
  out.d_slope = integrate(
      [&](double s) {
        const double e = std::exp(slope * (s - T) + offset);
        return digamma(e) * e * (s - T);
      },
      t, T);
  out.d_offset = integrate(
      [&](double s) {
        const double e = std::exp(slope * (s - T) + offset);
        return digamma(e) * e;
      },
      t, T);
  return out;
}

}  // namespace detail

/// Memoized per thread on the exact inputs; results do not depend on the
/// cache state.
inline LogGammaIntegrals log_gamma_integrals(double slope, double offset, double t, double T) {
  thread_local std::unordered_map<detail::IntegralKey, LogGammaIntegrals, detail::IntegralKeyHash> cache;
  const detail::IntegralKey key{slope, offset, t, T};
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  if (cache.size() > 4096) cache.clear();
  const auto r = detail::compute_log_gamma_integrals(slope, offset, t, T);
  cache.emplace(key, r);
  return r;
}

inline void check_state(double x, double mu) {
  if (!(x > 0.0)) throw DomainError("jump: state must be positive");
  if (!(mu > 0.0)) throw DomainError("jump: mean must be positive");
}

// ---------------------------------------------------------------------------
// MFG family: theta1..theta6, psi1..psi3
// ---------------------------------------------------------------------------

inline double mfg_value(std::span<const double> th, double gamma, double t, double x, double mu, double T) {
  if (th.size() != 6) throw ArgumentError("mfg: theta has 6 components");
  check_state(x, mu);
  const double tau = t - T;
  const double L = std::log(x) - std::log(mu);
  const double e2 = std::exp(th[1] * tau);
  const double I = log_gamma_integrals(th[1], th[5], t, T).value;
  return ((1.0 + th[0]) * e2 - th[0]) * L + th[2] * tau + th[3] * (e2 - 1.0) + th[4] * (e2 * e2 - 1.0) + gamma * I;
}

inline std::array<double, 6> mfg_grad_value(std::span<const double> th, double gamma, double t, double x, double mu,
                                            double T) {
  if (th.size() != 6) throw ArgumentError("mfg: theta has 6 components");
  check_state(x, mu);
  const double tau = t - T;
  const double L = std::log(x) - std::log(mu);
  const double e2 = std::exp(th[1] * tau);
  const auto I = log_gamma_integrals(th[1], th[5], t, T);
  return {(e2 - 1.0) * L,
          (1.0 + th[0]) * tau * e2 * L + th[3] * tau * e2 + 2.0 * th[4] * tau * e2 * e2 + gamma * I.d_slope,
          tau,
          e2 - 1.0,
          e2 * e2 - 1.0,
          gamma * I.d_offset};
}

inline double mfg_q(std::span<const double> ps, double gamma, double t, double x, double mu, double a, double h,
                    double T) {
  if (ps.size() != 3) throw ArgumentError("mfg: psi has 3 components");
  check_state(x, mu);
  if (!(a > -1.0)) throw DomainError("mfg_q: action must exceed -1");
  const double A = std::exp(ps[0] + ps[1] * (t - T));
  const double c = std::exp(ps[2]);
  const double u = 1.0 + a;
  const double y = x / mu;
  return A * std::log(y) + (A - gamma) * std::log(u) - (gamma + c) * y * u - (A - gamma) * h / mu -
         A * std::log(gamma / (gamma + c)) - gamma * ln_gamma(A / gamma) + (A - gamma) * (A / (gamma + c) - 1.0);
}

inline std::array<double, 3> mfg_grad_q(std::span<const double> ps, double gamma, double t, double x, double mu,
                                        double a, double h, double T) {
  if (ps.size() != 3) throw ArgumentError("mfg: psi has 3 components");
  check_state(x, mu);
  if (!(a > -1.0)) throw DomainError("mfg_q: action must exceed -1");
  const double tau = t - T;
  const double A = std::exp(ps[0] + ps[1] * tau);
  const double c = std::exp(ps[2]);
  const double u = 1.0 + a;
  const double y = x / mu;
  const double gc = gamma + c;
  const double dA = std::log(y) + std::log(u) - h / mu - std::log(gamma / gc) - digamma(A / gamma) + (A / gc - 1.0) +
                    (A - gamma) / gc;
  return {A * dA, A * tau * dA, c * (-y * u + A / gc - (A - gamma) * A / (gc * gc))};
}

inline ShiftedGammaPolicy mfg_policy(std::span<const double> ps, double gamma, double t, double x, double mu,
                                     double T) {
  check_state(x, mu);
  const double A = std::exp(ps[0] + ps[1] * (t - T));
  return {A / gamma, (std::exp(ps[2]) + gamma) * x / (gamma * mu)};
}

/// E[xi a] over a population with mean mu playing the MFG-family policy psi.
inline double mfg_action_moment(std::span<const double> ps, double gamma, double t, double mu, double T) {
  const double A = std::exp(ps[0] + ps[1] * (t - T));
  return mu * (A / (std::exp(ps[2]) + gamma) - 1.0);
}

struct MFGConstants {
  double K1, K2, K3;
};

inline MFGConstants mfg_constants(const JumpEnvParams& env) {
  const double g = env.gamma, e = env.eta, s2 = env.sigma * env.sigma, r0 = env.r0;
  return {-g * (s2 / (2.0 * e) - 1.0),
          -(e + g) * (r0 + g) / (r0 * e) - (g + e) / e * std::log(g / r0) + s2 * (g + e) / (2.0 * e * e),
          (e + g) * (e + g) / (2.0 * e * r0)};
}

inline std::vector<double> mfg_true_theta(const JumpEnvParams& env) {
  const auto k = mfg_constants(env);
  return {env.gamma / env.eta, env.eta, k.K1, k.K2, k.K3, std::log((env.gamma + env.eta) / env.gamma)};
}

inline std::vector<double> jump_true_psi(const JumpEnvParams& env) {
  return {std::log(env.gamma + env.eta), env.eta, std::log(env.r0 - env.gamma)};
}

// ---------------------------------------------------------------------------
// MFC family: theta1..theta7, psi1..psi3
// ---------------------------------------------------------------------------

inline double mfc_value(std::span<const double> th, double gamma, double t, double x, double mu, double T) {
  if (th.size() != 7) throw ArgumentError("mfc: theta has 7 components");
  check_state(x, mu);
  if (!(th[1] > 0.0)) throw DomainError("mfc_value: theta2 must be positive");
  const double tau = t - T;
  const double L = std::log(x) - std::log(mu);
  const double e2 = std::exp(th[1] * tau);
  const double w5 = std::exp(th[4]);
  const double w6 = std::exp(th[5]);
  const double P = w6 * e2 + w5;
  const double P0 = w6 + w5;
  const double I = log_gamma_integrals(th[1], th[6], t, T).value;
  return ((1.0 + th[0]) * e2 - th[0]) * L + th[2] * tau + th[3] * (e2 - 1.0) + w5 * (std::log(P) - std::log(P0)) +
         gamma * I + w6 * (e2 * std::log(th[1] * P) - std::log(th[1] * P0));
}

inline std::array<double, 7> mfc_grad_value(std::span<const double> th, double gamma, double t, double x, double mu,
                                            double T) {
  if (th.size() != 7) throw ArgumentError("mfc: theta has 7 components");
  check_state(x, mu);
  if (!(th[1] > 0.0)) throw DomainError("mfc_value: theta2 must be positive");
  const double tau = t - T;
  const double L = std::log(x) - std::log(mu);
  const double th2 = th[1];
  const double e2 = std::exp(th2 * tau);
  const double w5 = std::exp(th[4]);
  const double w6 = std::exp(th[5]);
  const double P = w6 * e2 + w5;
  const double P0 = w6 + w5;
  const double logP = std::log(th2 * P);
  const double logP0 = std::log(th2 * P0);
  const auto I = log_gamma_integrals(th2, th[6], t, T);
  const double dP_dth2 = w6 * tau * e2;
  return {
      (e2 - 1.0) * L,
      (1.0 + th[0]) * tau * e2 * L + th[3] * tau * e2 + w5 * dP_dth2 / P + gamma * I.d_slope +
          w6 * (tau * e2 * logP + e2 * (1.0 / th2 + dP_dth2 / P) - 1.0 / th2),
      tau,
      e2 - 1.0,
      w5 * (std::log(P) - std::log(P0)) + w5 * (w5 / P - w5 / P0) + w6 * (e2 * w5 / P - w5 / P0),
      w5 * (w6 * e2 / P - w6 / P0) + w6 * (e2 * logP - logP0) + w6 * (e2 * w6 * e2 / P - w6 / P0),
      gamma * I.d_offset,
  };
}

inline double mfc_q(std::span<const double> ps, double gamma, double t, double x, double mu, double a, double h,
                    double T) {
  if (ps.size() != 3) throw ArgumentError("mfc: psi has 3 components");
  check_state(x, mu);
  if (!(a > -1.0)) throw DomainError("mfc_q: action must exceed -1");
  const double A = std::exp(ps[0] + ps[1] * (t - T));
  const double c = std::exp(ps[2]);
  const double u = 1.0 + a;
  const double y = x / mu;
  return A * std::log(y) + (A - gamma) * std::log(u) - (gamma + c) * y * u - (A - gamma) * h / mu -
         (1.0 + std::log(gamma)) * A + gamma - gamma * ln_gamma(A / gamma) + A * std::log(A + c);
}

inline std::array<double, 3> mfc_grad_q(std::span<const double> ps, double gamma, double t, double x, double mu,
                                        double a, double h, double T) {
  if (ps.size() != 3) throw ArgumentError("mfc: psi has 3 components");
  check_state(x, mu);
  if (!(a > -1.0)) throw DomainError("mfc_q: action must exceed -1");
  const double tau = t - T;
  const double A = std::exp(ps[0] + ps[1] * tau);
  const double c = std::exp(ps[2]);
  const double u = 1.0 + a;
  const double y = x / mu;
  const double dA = std::log(y) + std::log(u) - h / mu - (1.0 + std::log(gamma)) - digamma(A / gamma) +
                    std::log(A + c) + A / (A + c);
  return {A * dA, A * tau * dA, c * (-y * u + A / (A + c))};
}

/// The rate uses (e^{psi1+psi2 tau} + e^{psi3}) x / (gamma mu).
inline ShiftedGammaPolicy mfc_policy(std::span<const double> ps, double gamma, double t, double x, double mu,
                                     double T) {
  check_state(x, mu);
  const double A = std::exp(ps[0] + ps[1] * (t - T));
  return {A / gamma, (A + std::exp(ps[2])) * x / (gamma * mu)};
}

inline double mfc_action_moment(std::span<const double> ps, double /*gamma*/, double t, double mu, double T) {
  const double A = std::exp(ps[0] + ps[1] * (t - T));
  return mu * (A / (A + std::exp(ps[2])) - 1.0);
}

struct MFCConstants {
  double K1, K2, K3, K4;
};

inline MFCConstants mfc_constants(const JumpEnvParams& env) {
  const double g = env.gamma, e = env.eta, s2 = env.sigma * env.sigma, r0 = env.r0;
  return {-g * (s2 / (2.0 * e) - 1.0), (g + e) / e * (s2 / (2.0 * e) - 2.0 - std::log(g)), (r0 - g) / e,
          (g + e) / e};
}

inline std::vector<double> mfc_true_theta(const JumpEnvParams& env) {
  const auto k = mfc_constants(env);
  return {env.gamma / env.eta,
          env.eta,
          k.K1,
          k.K2,
          std::log((env.r0 - env.gamma) / env.eta),
          std::log((env.gamma + env.eta) / env.eta),
          std::log((env.gamma + env.eta) / env.gamma)};
}

// ---------------------------------------------------------------------------
// Model adapters
// ---------------------------------------------------------------------------

class JumpModelBase {
 public:
  static constexpr bool needs_true_mean = true;

  explicit JumpModelBase(JumpEnvParams env) : env_(env) { env_.validate(); }

  const JumpEnvParams& env() const noexcept { return env_; }
  std::size_t psi_dim() const noexcept { return 3; }
  std::vector<std::string> psi_names() const { return {"psi1", "psi2", "psi3"}; }
  double horizon() const noexcept { return env_.T; }
  double temperature() const noexcept { return env_.gamma; }
  double discount() const noexcept { return 0.0; }

  Noise draw_noise(double dt, RngStream& rng) const { return jump_noise(env_, dt, rng); }
  StepResult step_with(double /*t*/, double x, double a, double dt, const Noise& nz, double mu_true) const {
    return jump_step_with(env_, x, a, dt, nz, mu_true);
  }
  template <class Redraw>
  StepResult step_with(double /*t*/, double x, double a, double dt, const Noise& nz, double mu_true,
                       Redraw&& redraw) const {
    return jump_step_sequential(env_, x, a, dt, nz, mu_true, redraw);
  }
  bool action_affects_state(const Noise& nz) const noexcept { return nz.dN > 0; }
  double terminal(double x, double mu) const {
    check_state(x, mu);
    return std::log(x) - std::log(mu);
  }
  double initial_state(RngStream& rng) const {
    if (env_.x0_log_sd == 0.0) return env_.x0;
    const double s = env_.x0_log_sd;
    return env_.x0 * std::exp(s * rng.standard_normal() - 0.5 * s * s);
  }
  double initial_mean() const noexcept { return env_.x0; }
  std::vector<double> true_psi() const { return jump_true_psi(env_); }

 protected:
  JumpEnvParams env_;
};

class MFGModel : public JumpModelBase {
 public:
  static constexpr const char* id = "jump-mfg";
  explicit MFGModel(JumpEnvParams env = {}) : JumpModelBase(env) {}

  std::size_t theta_dim() const noexcept { return 6; }
  std::vector<std::string> theta_names() const {
    return {"theta1", "theta2", "theta3", "theta4", "theta5", "theta6"};
  }
  double value(std::span<const double> th, double t, double x, double mu) const {
    return mfg_value(th, env_.gamma, t, x, mu, env_.T);
  }
  void value_grad(std::span<const double> th, double t, double x, double mu, std::span<double> out) const {
    const auto g = mfg_grad_value(th, env_.gamma, t, x, mu, env_.T);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i];
  }
  double q(std::span<const double> ps, double t, double x, double mu, double a, double h) const {
    return mfg_q(ps, env_.gamma, t, x, mu, a, h, env_.T);
  }
  void q_grad(std::span<const double> ps, double t, double x, double mu, double a, double h,
              std::span<double> out) const {
    const auto g = mfg_grad_q(ps, env_.gamma, t, x, mu, a, h, env_.T);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i];
  }
  ShiftedGammaPolicy policy(std::span<const double> ps, double t, double x, double mu) const {
    return mfg_policy(ps, env_.gamma, t, x, mu, env_.T);
  }
  double mf_moment(std::span<const double> ps, double t, double mu) const {
    return mfg_action_moment(ps, env_.gamma, t, mu, env_.T);
  }
  std::vector<double> true_theta() const { return mfg_true_theta(env_); }
};

class MFCModel : public JumpModelBase {
 public:
  static constexpr const char* id = "jump-mfc";
  explicit MFCModel(JumpEnvParams env = {}) : JumpModelBase(env) {}

  std::size_t theta_dim() const noexcept { return 7; }
  std::vector<std::string> theta_names() const {
    return {"theta1", "theta2", "theta3", "theta4", "theta5", "theta6", "theta7"};
  }
  double value(std::span<const double> th, double t, double x, double mu) const {
    return mfc_value(th, env_.gamma, t, x, mu, env_.T);
  }
  void value_grad(std::span<const double> th, double t, double x, double mu, std::span<double> out) const {
    const auto g = mfc_grad_value(th, env_.gamma, t, x, mu, env_.T);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i];
  }
  double q(std::span<const double> ps, double t, double x, double mu, double a, double h) const {
    return mfc_q(ps, env_.gamma, t, x, mu, a, h, env_.T);
  }
  void q_grad(std::span<const double> ps, double t, double x, double mu, double a, double h,
              std::span<double> out) const {
    const auto g = mfc_grad_q(ps, env_.gamma, t, x, mu, a, h, env_.T);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i];
  }
  ShiftedGammaPolicy policy(std::span<const double> ps, double t, double x, double mu) const {
    return mfc_policy(ps, env_.gamma, t, x, mu, env_.T);
  }
  double mf_moment(std::span<const double> ps, double t, double mu) const {
    return mfc_action_moment(ps, env_.gamma, t, mu, env_.T);
  }
  std::vector<double> true_theta() const { return mfc_true_theta(env_); }
};

static_assert(ModelFamily<MFGModel>);
static_assert(ModelFamily<MFCModel>);

}  // namespace mfq::jump
