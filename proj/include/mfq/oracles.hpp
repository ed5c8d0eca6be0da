#pragma once

// Ground truth built from environment constants only: closed-form value and
// q-functions, ODE residuals, quadrature checks of the consistency
// identities, and a brute-force Monte-Carlo value estimator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "mfq/errors.hpp"
#include "mfq/evaluation.hpp"
#include "mfq/jump_models.hpp"
#include "mfq/mv_model.hpp"
#include "mfq/numerics.hpp"
#include "mfq/policy.hpp"

namespace mfq::oracle {

enum class ModelId { MV, JumpMFG, JumpMFC };

inline std::string to_string(ModelId id) {
  switch (id) {
    case ModelId::MV: return "mv";
    case ModelId::JumpMFG: return "jump-mfg";
    case ModelId::JumpMFC: return "jump-mfc";
  }
  return "?";
}

inline ModelId model_id_from_string(std::string_view s) {
  if (s == "mv") return ModelId::MV;
  if (s == "jump-mfg") return ModelId::JumpMFG;
  if (s == "jump-mfc") return ModelId::JumpMFC;
  throw ArgumentError("unknown model id '" + std::string(s) + "'");
}

/// Signed integral over [lo, hi] that also accepts lo > hi.
template <class F>
double signed_integral(F&& f, double lo, double hi) {
  if (lo <= hi) return integrate_panels(f, lo, hi, 8, 48);
  return -integrate_panels(f, hi, lo, 8, 48);
}

// ---------------------------------------------------------------------------
// Mean-variance
// ---------------------------------------------------------------------------

/// J* = A(t)(x - mu)^2 + C(t) x + D(t); q* is obtained by applying the
/// generator to J*.
class MVClosedForm {
 public:
  explicit MVClosedForm(mv::MVEnvParams env) : env_(env) {
    env_.validate();
    v_ = env_.total_variance();
    kappa_ = env_.b * env_.b / v_;
  }

  const mv::MVEnvParams& env() const noexcept { return env_; }
  double kappa() const noexcept { return kappa_; }
  double variance() const noexcept { return v_; }

  double A(double t) const { return -env_.lambda * std::exp(kappa_ * (t - env_.T)); }
  double dA(double t) const { return kappa_ * A(t); }
  double C(double) const { return 1.0; }
  double dC(double) const { return 0.0; }
  double D(double t) const {
    const double tau = t - env_.T, g = env_.gamma, l = env_.lambda;
    return g * kappa_ / 4.0 * tau * tau - tau * g / 2.0 * std::log(std::numbers::pi * g / (v_ * l)) +
           std::exp(-kappa_ * tau) / (4.0 * l) - 1.0 / (4.0 * l);
  }
  double dD(double t) const {
    const double tau = t - env_.T, g = env_.gamma, l = env_.lambda;
    return g * kappa_ / 2.0 * tau - g / 2.0 * std::log(std::numbers::pi * g / (v_ * l)) -
           kappa_ * std::exp(-kappa_ * tau) / (4.0 * l);
  }

  /// Right-hand sides of the coefficient ODEs.
  double A_rhs(double t) const { return kappa_ * A(t); }
  double C_rhs(double) const { return 0.0; }
  double D_rhs(double t) const {
    const double a = A(t), c = C(t);
    return env_.b * env_.b * c * c / (4.0 * v_ * a) - env_.gamma / 2.0 * std::log(-std::numbers::pi * env_.gamma / (v_ * a));
  }

  double value(double t, double x, double mu) const {
    const double d = x - mu;
    return A(t) * d * d + C(t) * x + D(t);
  }

  /// h = E[a] over the population playing the test policy.
  double q(double t, double x, double mu, double a, double h) const {
    const double d = x - mu;
    const double dxJ = 2.0 * A(t) * d + C(t);
    const double dxxJ = 2.0 * A(t);
    const double own = dA(t) * d * d + dC(t) * x + dD(t) + env_.b * a * dxJ + 0.5 * v_ * a * a * dxxJ;
    // population term: generator of dJ/dmu(v) = 2 A v (mu - x), drift b a'
    return own + 2.0 * env_.b * A(t) * (mu - x) * h;
  }

  GaussianPolicy policy(double t, double x, double mu) const {
    const double em = std::exp(-kappa_ * (t - env_.T));
    return {-env_.b / v_ * (x - mu - em / (2.0 * env_.lambda)), env_.gamma / (2.0 * env_.lambda * v_) * em};
  }

  /// Population mean at time s when every agent plays the optimal policy
  /// from mean mu at time t.
  double mean_flow(double t, double mu, double s) const {
    return mu + (std::exp(-kappa_ * (t - env_.T)) - std::exp(-kappa_ * (s - env_.T))) / (2.0 * env_.lambda);
  }

 private:
  mv::MVEnvParams env_;
  double v_ = 0.0;
  double kappa_ = 0.0;
};

// ---------------------------------------------------------------------------
// Jump control
// ---------------------------------------------------------------------------

/// J* = A(t) log x + B(t) log mu + C(t) for the MFG equilibrium or the MFC
/// optimum; q* is obtained by applying the generator to J*.
class JumpClosedForm {
 public:
  JumpClosedForm(jump::JumpEnvParams env, bool mfc) : env_(env), mfc_(mfc) { env_.validate(); }

  const jump::JumpEnvParams& env() const noexcept { return env_; }
  bool is_mfc() const noexcept { return mfc_; }

  double A(double t) const {
    const double g = env_.gamma, e = env_.eta;
    return (1.0 + g / e) * std::exp(e * (t - env_.T)) - g / e;
  }
  double dA(double t) const { return (env_.gamma + env_.eta) * std::exp(env_.eta * (t - env_.T)); }
  double B(double t) const { return -A(t); }
  double dB(double t) const { return -dA(t); }

  std::vector<double> constants() const {
    const double g = env_.gamma, e = env_.eta, s2 = env_.sigma * env_.sigma, r0 = env_.r0;
    if (mfc_)
      return {-g * (s2 / (2.0 * e) - 1.0), (g + e) / e * (s2 / (2.0 * e) - 2.0 - std::log(g)), (r0 - g) / e,
              (g + e) / e};
    return {-g * (s2 / (2.0 * e) - 1.0),
            -(e + g) * (r0 + g) / (r0 * e) - (g + e) / e * std::log(g / r0) + s2 * (g + e) / (2.0 * e * e),
            (e + g) * (e + g) / (2.0 * e * r0)};
  }

  /// Gamma shape of the optimal policy, (gamma + eta A) / gamma.
  double shape(double t) const { return (env_.gamma + env_.eta * A(t)) / env_.gamma; }

  double C(double t) const {
    const double T = env_.T, e = env_.eta, g = env_.gamma;
    const double tau = t - T;
    const double ex = std::exp(e * tau);
    const auto K = constants();
    const double I = signed_integral([&](double s) { return std::lgamma(shape(s)); }, t, T);
    if (!mfc_) return K[0] * tau + K[1] * (ex - 1.0) + K[2] * (ex * ex - 1.0) + g * I;
    const double W = (g + e) * ex + env_.r0 - g;
    const double WT = e + env_.r0;
    return K[0] * tau + K[1] * (ex - 1.0) + K[2] * (std::log(W) - std::log(WT)) +
           K[3] * (ex * std::log(W) - std::log(WT)) + g * I;
  }

  double dC(double t) const {
    const double e = env_.eta, g = env_.gamma;
    const double ex = std::exp(e * (t - env_.T));
    const auto K = constants();
    const double lg = std::lgamma(shape(t));
    if (!mfc_) return K[0] + K[1] * e * ex + 2.0 * K[2] * e * ex * ex - g * lg;
    const double W = (g + e) * ex + env_.r0 - g;
    const double dW = (g + e) * e * ex;
    return K[0] + K[1] * e * ex + K[2] * dW / W + K[3] * (e * ex * std::log(W) + ex * dW / W) - g * lg;
  }

  double A_rhs(double t) const { return env_.gamma + env_.eta * A(t); }
  double B_rhs(double t) const { return -(env_.gamma + env_.eta * A(t)); }
  double C_rhs(double t) const {
    const double g = env_.gamma, e = env_.eta, r0 = env_.r0, s2 = env_.sigma * env_.sigma;
    const double a = A(t), b = B(t);
    if (!mfc_)
      return s2 / 2.0 * a - (g + e * a) * std::log(g / r0) - g * std::lgamma(1.0 + e * a / g) -
             e * b * (g + e * a) / r0 + e * b;
    return e * b + s2 / 2.0 * a - (g + e * a) * std::log(g / (r0 - e * b)) - g * std::lgamma(1.0 + e * a / g);
  }

  double value(double t, double x, double mu) const {
    check(x, mu);
    return A(t) * std::log(x) + B(t) * std::log(mu) + C(t);
  }

  /// h = E[xi a] over the population playing the test policy.
  double q(double t, double x, double mu, double a, double h) const {
    check(x, mu);
    if (!(a > -1.0)) throw DomainError("jump q*: action must exceed -1");
    const double e = env_.eta;
    const double own = dA(t) * std::log(x) + dB(t) * std::log(mu) + dC(t) + e * A(t) * std::log1p(a) -
                       0.5 * env_.sigma * env_.sigma * A(t) - env_.r0 * (1.0 + a) * x / mu;
    // population term: generator of dJ/dmu(v) = B v / mu under jumps of size a'
    return own + e * B(t) * h / mu;
  }

  double rate(double t, double x, double mu) const {
    const double base = mfc_ ? env_.r0 - env_.eta * B(t) : env_.r0;
    return base * x / (env_.gamma * mu);
  }

  ShiftedGammaPolicy policy(double t, double x, double mu) const {
    check(x, mu);
    return {shape(t), rate(t, x, mu)};
  }

  /// E[xi a] under the optimal policy, divided by mu.
  double relative_moment(double t) const {
    const double base = mfc_ ? env_.r0 - env_.eta * B(t) : env_.r0;
    return env_.gamma * shape(t) / base - 1.0;
  }

  /// Population mean at time s under the optimal policy, from mean mu at t.
  double mean_flow(double t, double mu, double s) const {
    if (s == t) return mu;
    const double growth = signed_integral([&](double u) { return env_.eta * relative_moment(u); }, t, s);
    return mu * std::exp(growth);
  }

 private:
  static void check(double x, double mu) {
    if (!(x > 0.0) || !(mu > 0.0)) throw DomainError("jump closed form: state and mean must be positive");
  }

  jump::JumpEnvParams env_;
  bool mfc_ = false;
};

// ---------------------------------------------------------------------------
// Parameterization checks
// ---------------------------------------------------------------------------

struct Deviation {
  double value = 0.0;
  double q = 0.0;
  double max() const noexcept { return value > q ? value : q; }
};

/// max |J^{theta*} - J*| and |q^{psi*} - q*| at random interior points.
inline Deviation verify_parameterization(ModelId id, int points, std::uint64_t seed = 1,
                                         const mv::MVEnvParams& mv_env = {},
                                         const jump::JumpEnvParams& jump_env = {}) {
  if (points < 1) throw ArgumentError("verify_parameterization: points must be >= 1");
  RngStream rng(seed, stream_id({0x0c0de, static_cast<std::uint64_t>(id)}));
  Deviation dev;
  auto track = [](double& slot, double d) {
    if (!std::isfinite(d)) throw NumericError("verify_parameterization", "non-finite deviation");
    if (std::abs(d) > slot) slot = std::abs(d);
  };
  if (id == ModelId::MV) {
    const mv::MVModel m(mv_env);
    const MVClosedForm cf(mv_env);
    const auto th = m.true_theta();
    const auto ps = m.true_psi();
    for (int i = 0; i < points; ++i) {
      const double t = sample_uniform(rng, 0.0, mv_env.T);
      const double x = sample_uniform(rng, -2.0, 4.0);
      const double mu = sample_uniform(rng, -1.0, 3.0);
      const double a = sample_uniform(rng, -3.0, 3.0);
      const double h = sample_uniform(rng, -2.0, 2.0);
      track(dev.value, m.value(th, t, x, mu) - cf.value(t, x, mu));
      track(dev.q, m.q(ps, t, x, mu, a, h) - cf.q(t, x, mu, a, h));
    }
    return dev;
  }
  const bool mfc = id == ModelId::JumpMFC;
  const JumpClosedForm cf(jump_env, mfc);
  const jump::MFGModel mfg(jump_env);
  const jump::MFCModel mfcm(jump_env);
  const auto th = mfc ? mfcm.true_theta() : mfg.true_theta();
  const auto ps = mfg.true_psi();
  for (int i = 0; i < points; ++i) {
    const double t = sample_uniform(rng, 0.0, jump_env.T);
    const double x = std::exp(sample_uniform(rng, -1.5, 1.5));
    const double mu = std::exp(sample_uniform(rng, -1.0, 1.0));
    const double a = std::exp(sample_uniform(rng, -3.0, 1.5)) - 1.0;
    const double h = mu * sample_uniform(rng, -0.9, 1.0);
    const double jv = mfc ? mfcm.value(th, t, x, mu) : mfg.value(th, t, x, mu);
    const double jq = mfc ? mfcm.q(ps, t, x, mu, a, h) : mfg.q(ps, t, x, mu, a, h);
    track(dev.value, jv - cf.value(t, x, mu));
    track(dev.q, jq - cf.q(t, x, mu, a, h));
  }
  return dev;
}

struct OdeResiduals {
  double A = 0.0;
  double B = 0.0;  // C(t) for MV
  double C = 0.0;  // D(t) for MV
};

/// Five-point central difference.
template <class F>
double fd5(F&& f, double t, double step) {
  return (-f(t + 2.0 * step) + 8.0 * f(t + step) - 8.0 * f(t - step) + f(t - 2.0 * step)) / (12.0 * step);
}

/// A and B residuals use analytic derivatives. The C residual
/// differentiates the closed-form C, quadrature term included,
/// numerically with step fd_step.
inline OdeResiduals ode_residual(ModelId id, std::span<const double> t_samples, const mv::MVEnvParams& mv_env = {},
                                 const jump::JumpEnvParams& jump_env = {}, double fd_step = 1e-3) {
  OdeResiduals r;
  auto track = [](double& slot, double d) {
    if (!std::isfinite(d)) throw NumericError("ode_residual", "non-finite residual");
    if (std::abs(d) > slot) slot = std::abs(d);
  };
  if (id == ModelId::MV) {
    const MVClosedForm cf(mv_env);
    for (double t : t_samples) {
      track(r.A, cf.dA(t) - cf.A_rhs(t));
      track(r.B, cf.dC(t) - cf.C_rhs(t));
      track(r.C, fd5([&](double s) { return cf.D(s); }, t, fd_step) - cf.D_rhs(t));
    }
    return r;
  }
  const JumpClosedForm cf(jump_env, id == ModelId::JumpMFC);
  for (double t : t_samples) {
    track(r.A, cf.dA(t) - cf.A_rhs(t));
    track(r.B, cf.dB(t) - cf.B_rhs(t));
    track(r.C, fd5([&](double s) { return cf.C(s); }, t, fd_step) - cf.C_rhs(t));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Consistency identities by quadrature over actions
// ---------------------------------------------------------------------------

/// Integral of f over the action support of a policy.
template <class F>
double integrate_actions(const GaussianPolicy& p, F&& f) {
  return integrate_panels(f, p.lower(), p.upper(), 24, 48);
}

/// Shifted Gamma: substitute a = e^z - 1 so the integrand is smooth near -1.
template <class F>
double integrate_actions(const ShiftedGammaPolicy& p, F&& f) {
  const double m = std::log(p.shape / p.rate);
  // below z = -36 the shift e^z - 1 rounds to -1 in double precision
  const double lo = std::max(m - 40.0 / std::min(p.shape, 1.0) - 5.0, -36.0);
  if (p.shape * (m - lo) < 30.0) throw DomainError("integrate_actions: Gamma shape too small for the quadrature");
  const double hi = std::log((p.shape + 60.0 + 12.0 * std::sqrt(p.shape)) / p.rate);
  const int panels = std::max(16, static_cast<int>(std::ceil(hi - lo)) * 2);
  return integrate_panels([&](double z) { return f(std::expm1(z)) * std::exp(z); }, lo, hi, panels, 32);
}

struct ConsistencyResult {
  double normalization = 0.0;  // |integral of policy density - 1|
  double gibbs = 0.0;          // max_a |log pi(a) - (q/gamma - log Z)|
  double value = 0.0;          // residual of the value-consistency identity
};

/// Checks the parameterized q against its own policy at (t, x) with a
/// population given by equally weighted states. phi(y) is the weight of
/// state y in the population moment (1 for MV, y for the jump models).
/// The q-function is affine in the moment h, which identifies q1 and q2.
template <ModelFamily M, class Phi>
ConsistencyResult consistency_check(const M& model, std::span<const double> psi, double t, double x,
                                    std::span<const double> population, bool mfc, Phi&& phi) {
  if (population.empty()) throw ArgumentError("consistency_check: empty population");
  double mu = 0.0;
  for (double y : population) mu += y;
  mu /= static_cast<double>(population.size());
  const double g = model.temperature();

  // population moment under pi^psi, by quadrature
  double h = 0.0;
  for (double y : population) {
    const auto py = model.policy(psi, t, y, mu);
    h += phi(y) * integrate_actions(py, [&](double a) { return a * std::exp(py.log_density(a)); });
  }
  h /= static_cast<double>(population.size());

  auto q1 = [&](double xx, double a) { return model.q(psi, t, xx, mu, a, 0.0); };
  auto slope = [&](double xx, double a) { return model.q(psi, t, xx, mu, a, 1.0) - model.q(psi, t, xx, mu, a, 0.0); };

  const auto pol = model.policy(psi, t, x, mu);
  ConsistencyResult res;
  res.normalization = std::abs(integrate_actions(pol, [&](double a) { return std::exp(pol.log_density(a)); }) - 1.0);

  // Gibbs exponent: q1 for MFG; for MFC the essential q adds
  // a * phi(x) * (population average of the h-slope). The slope does not
  // depend on the action in these families.
  double cbar = 0.0;
  for (double y : population) cbar += slope(y, model.policy(psi, t, y, mu).mean());
  cbar /= static_cast<double>(population.size());
  auto exponent = [&](double a) { return (q1(x, a) + (mfc ? phi(x) * a * cbar : 0.0)) / g; };
  const double shift = exponent(pol.mean());
  const double Z = integrate_actions(pol, [&](double a) { return std::exp(exponent(a) - shift); });
  const double logZ = std::log(Z) + shift;
  for (int i = 1; i <= 9; ++i) {
    const double a = pol.mean() + (i - 5) * 0.4 * std::sqrt(pol.variance());
    if constexpr (std::is_same_v<std::decay_t<decltype(pol)>, ShiftedGammaPolicy>) {
      if (!(a > -1.0)) continue;
    }
    const double d = std::abs(pol.log_density(a) - (exponent(a) - logZ));
    if (d > res.gibbs) res.gibbs = d;
  }

  if (!mfc) {
    res.value = std::abs(g * logZ + slope(x, pol.mean()) * h);
  } else {
    res.value = std::abs(integrate_actions(pol, [&](double a) {
      const double w = std::exp(pol.log_density(a));
      return (model.q(psi, t, x, mu, a, h) - g * pol.log_density(a)) * w;
    }));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Monte-Carlo value oracle
// ---------------------------------------------------------------------------

/// A representative-agent problem against an exogenous mean flow.
struct DecoupledProblem {
  double gamma = 0.0;
  /// returns (action, log density of the action)
  std::function<std::pair<double, double>(double t, double x, double mu, RngStream&)> act;
  std::function<double(double t, double x, double a, double dt, double mu, RngStream&)> step;
  std::function<double(double t, double x, double a, double mu)> reward;
  std::function<double(double x, double mu)> terminal;
};

/// E[ sum_k (r - gamma log pi(a)) dt + g(X_T, mu_T) ] from (t, x) with
/// `steps` equal steps to T. Paths run in parallel with per-path streams.
inline Estimate mc_value_oracle(const DecoupledProblem& p, double t, double x, double T,
                                const std::function<double(double)>& mean_flow, int paths, int steps,
                                std::uint64_t seed) {
  if (paths < 2) throw ArgumentError("mc_value_oracle: need at least 2 paths");
  if (steps < 1 || !(T > t)) throw ArgumentError("mc_value_oracle: need t < T and steps >= 1");
  const double dt = (T - t) / steps;
  std::vector<double> mus(steps + 1);
  for (int k = 0; k <= steps; ++k) mus[k] = mean_flow(k == steps ? T : t + k * dt);
  std::vector<double> out(paths);
  std::vector<std::exception_ptr> err(paths);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < paths; ++i) {
    try {
      RngStream rng(seed, stream_id({0x3c, static_cast<std::uint64_t>(i)}));
      double xi = x, acc = 0.0;
      for (int k = 0; k < steps; ++k) {
        const double s = t + k * dt;
        const auto [a, logp] = p.act(s, xi, mus[k], rng);
        acc += (p.reward(s, xi, a, mus[k]) - p.gamma * logp) * dt;
        xi = p.step(s, xi, a, dt, mus[k], rng);
      }
      out[i] = acc + p.terminal(xi, mus[steps]);
    } catch (...) {
      err[i] = std::current_exception();
    }
  }
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
  double s = 0.0, s2 = 0.0;
  for (double v : out) {
    s += v;
    s2 += v * v;
  }
  const double mean = s / paths;
  const double var = std::max(0.0, (s2 - paths * mean * mean) / (paths - 1));
  return {mean, std::sqrt(var / paths), paths};
}

/// MV agent playing the closed-form optimal policy. Simulated with its own
/// Euler step, independent of the model module.
inline DecoupledProblem mv_optimal_problem(const mv::MVEnvParams& env) {
  const MVClosedForm cf(env);
  DecoupledProblem p;
  p.gamma = env.gamma;
  p.act = [cf](double t, double x, double mu, RngStream& rng) {
    const auto pol = cf.policy(t, x, mu);
    const double a = pol.mu + std::sqrt(pol.var) * rng.standard_normal();
    return std::pair{a, pol.log_density(a)};
  };
  p.step = [env](double, double x, double a, double dt, double, RngStream& rng) {
    const double z = rng.standard_normal();
    double n = 0.0;
    // Poisson count by sequential inversion; eta dt is small
    double u = rng.uniform(), pk = std::exp(-env.eta * dt), cum = pk;
    while (u > cum) {
      n += 1.0;
      pk *= env.eta * dt / n;
      cum += pk;
    }
    return x + a * (env.b * dt + env.sigma * std::sqrt(dt) * z + env.jump * (n - env.eta * dt));
  };
  p.reward = [](double, double, double, double) { return 0.0; };
  p.terminal = [env](double x, double mu) { return x - env.lambda * (x - mu) * (x - mu); };
  return p;
}

/// Jump agent playing the closed-form optimal policy; every jump in a step
/// uses a fresh action at the current state.
inline DecoupledProblem jump_optimal_problem(const jump::JumpEnvParams& env, bool mfc) {
  const JumpClosedForm cf(env, mfc);
  DecoupledProblem p;
  p.gamma = env.gamma;
  p.act = [cf](double t, double x, double mu, RngStream& rng) {
    const auto pol = cf.policy(t, x, mu);
    const double a = std::max(sample_gamma(rng, pol.shape, pol.rate) - 1.0, std::nextafter(-1.0, 0.0));
    return std::pair{a, pol.log_density(a)};
  };
  p.step = [env, cf](double t, double x, double a, double dt, double mu, RngStream& rng) {
    const double z = rng.standard_normal();
    double u = rng.uniform(), pk = std::exp(-env.eta * dt), cum = pk;
    int n = 0;
    while (u > cum) {
      ++n;
      pk *= env.eta * dt / n;
      cum += pk;
    }
    double xn = x;
    for (int j = 0; j < n; ++j) {
      const double aj = j == 0 ? a : cf.policy(t, xn, mu).sample(rng);
      xn *= 1.0 + aj;
    }
    return xn * std::exp(env.sigma * std::sqrt(dt) * z - 0.5 * env.sigma * env.sigma * dt);
  };
  p.reward = [env](double, double x, double a, double mu) { return -env.r0 * (1.0 + a) * x / mu; };
  p.terminal = [](double x, double mu) { return std::log(x) - std::log(mu); };
  return p;
}

}  // namespace mfq::oracle
