#pragma once

// Offline q-learning loop: test-policy draws, rollouts with mean-flow
// estimation, martingale increments and DAMOC parameter updates.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mfq/errors.hpp"
#include "mfq/mean_flow.hpp"
#include "mfq/model.hpp"
#include "mfq/numerics.hpp"
#include "mfq/params.hpp"
#include "mfq/population.hpp"

namespace mfq {

/// Stream purposes mixed into stream ids.
enum StreamPurpose : std::uint64_t {
  kStreamTestPolicy = 1,
  kStreamRollout = 2,
  kStreamEnsemble = 3,
  kStreamEvaluation = 4,
  kStreamBatch = 5,
};

struct TransitionSample {
  int k;
  double x;
  double a;
  double mu;
  double r;
  double x_next;
  double mu_next;
};

struct Rollout {
  std::vector<double> psi_tilde;
  std::vector<TransitionSample> samples;
};

/// Optional action override for rollouts: (k, t, x, mu) -> a.
using ActionOverride = std::function<double(int, double, double, double)>;

/// Core rollout. mean_at(k, x_k) is called at every node k = 0..K before the
/// action and must return the agent's mean estimate at that node.
template <ModelFamily M, class MeanAt>
Rollout rollout_with(const M& model, const TimeGrid& grid, std::span<const double> psi_tilde, MeanAt&& mean_at,
                     RngStream& rng, std::type_identity_t<Ensemble<M>>* ensemble, const ActionOverride& actor = {}) {
  const int K = grid.steps();
  const double dt = grid.dt();
  Rollout out;
  out.psi_tilde.assign(psi_tilde.begin(), psi_tilde.end());
  out.samples.resize(K);
  double x = model.initial_state(rng);
  for (int k = 0; k < K; ++k) {
    const double t = grid.t(k);
    const double mu = mean_at(k, x);
    double a = 0.0;
    const double mu_true = ensemble ? ensemble->mean() : mu;
    try {
      a = actor ? actor(k, t, x, mu) : model.policy(psi_tilde, t, x, mu).sample(rng);
      const Noise nz = model.draw_noise(dt, rng);
      auto redraw = [&](double xm) { return model.policy(psi_tilde, t, xm, mu).sample(rng); };
      const StepResult st = transition(model, t, x, a, dt, nz, mu_true, redraw);
      if (!std::isfinite(st.x_next) || !std::isfinite(st.reward)) throw NumericError("state", "simulator output");
      out.samples[k] = {k, x, a, mu, st.reward, st.x_next, 0.0};
      x = st.x_next;
    } catch (const RolloutError&) {
      throw;
    } catch (const std::exception& e) {
      throw RolloutError(k, x, a, e.what());
    }
    if (ensemble) ensemble->step(t, dt);
  }
  const double mu_K = mean_at(K, x);
  for (int k = 0; k + 1 < K; ++k) out.samples[k].mu_next = out.samples[k + 1].mu;
  out.samples[K - 1].mu_next = mu_K;
  return out;
}

/// Learning-phase rollout for test policy m in episode j; the mean flow is
/// updated at each node before the action is taken.
template <ModelFamily M>
Rollout rollout(const M& model, const TimeGrid& grid, std::span<const double> psi_tilde, MeanFlow& flow, int m, int j,
                RngStream& rng, std::type_identity_t<Ensemble<M>>* ensemble = nullptr, const ActionOverride& actor = {}) {
  auto mean_at = [&](int k, double x) {
    flow.update(k, m, x, j);
    return flow.mean(k, m);
  };
  return rollout_with(model, grid, psi_tilde, mean_at, rng, ensemble, actor);
}

/// G = J(t_{k+1}, X', mu') - J(t_k, X, mu) + (r - beta J(t_k, X, mu) - q) dt,
/// with q evaluated at the test policy's mean-field action moment h.
template <ModelFamily M>
double g_increment(const M& model, std::span<const double> theta, std::span<const double> psi,
                   const TransitionSample& s, double h, const TimeGrid& grid) {
  const double dt = grid.dt();
  const double t0 = grid.t(s.k);
  const double t1 = grid.t(s.k + 1);
  const double j1 = model.value(theta, t1, s.x_next, s.mu_next);
  if (!std::isfinite(j1)) throw NumericError("J(t_{k+1})", "k=" + std::to_string(s.k));
  const double j0 = model.value(theta, t0, s.x, s.mu);
  if (!std::isfinite(j0)) throw NumericError("J(t_k)", "k=" + std::to_string(s.k));
  const double qv = model.q(psi, t0, s.x, s.mu, s.a, h);
  if (!std::isfinite(qv)) throw NumericError("q", "k=" + std::to_string(s.k));
  const double g = j1 - j0 + (s.r - model.discount() * j0 - qv) * dt;
  if (!std::isfinite(g)) throw NumericError("G", "k=" + std::to_string(s.k));
  return g;
}

template <ModelFamily M>
std::vector<double> increments(const M& model, std::span<const double> theta, std::span<const double> psi,
                               const Rollout& ro, const TimeGrid& grid) {
  std::vector<double> g(ro.samples.size());
  for (std::size_t i = 0; i < ro.samples.size(); ++i) {
    const auto& s = ro.samples[i];
    const double h = model.mf_moment(ro.psi_tilde, grid.t(s.k), s.mu);
    g[i] = g_increment(model, theta, psi, s, h, grid);
  }
  return g;
}

struct Deltas {
  std::vector<double> theta;
  std::vector<double> psi;
};

/// Delta theta = sum_k e^{-beta t_k} G_k dJ/dtheta, Delta psi likewise with dq/dpsi.
template <ModelFamily M>
Deltas deltas_from_increments(const M& model, std::span<const double> theta, std::span<const double> psi,
                              const Rollout& ro, std::span<const double> g, const TimeGrid& grid) {
  if (theta.size() != model.theta_dim() || psi.size() != model.psi_dim())
    throw ArgumentError("episode_deltas: parameter dimension mismatch");
  if (g.size() != ro.samples.size()) throw ArgumentError("episode_deltas: increment count mismatch");
  Deltas d{std::vector<double>(theta.size(), 0.0), std::vector<double>(psi.size(), 0.0)};
  std::vector<double> gt(theta.size()), gp(psi.size());
  for (std::size_t i = 0; i < ro.samples.size(); ++i) {
    const auto& s = ro.samples[i];
    const double t = grid.t(s.k);
    const double w = std::exp(-model.discount() * t) * g[i];
    model.value_grad(theta, t, s.x, s.mu, gt);
    model.q_grad(psi, t, s.x, s.mu, s.a, model.mf_moment(ro.psi_tilde, t, s.mu), gp);
    for (std::size_t c = 0; c < gt.size(); ++c) d.theta[c] += w * gt[c];
    for (std::size_t c = 0; c < gp.size(); ++c) d.psi[c] += w * gp[c];
  }
  return d;
}

template <ModelFamily M>
Deltas episode_deltas(const M& model, std::span<const double> theta, std::span<const double> psi, const Rollout& ro,
                      const TimeGrid& grid) {
  const auto g = increments(model, theta, psi, ro, grid);
  return deltas_from_increments(model, theta, psi, ro, g, grid);
}

/// Mean of per-rollout deltas in index order.
inline Deltas mean_deltas(std::span<const Deltas> per_m) {
  if (per_m.empty()) throw ArgumentError("mean_deltas: empty batch");
  Deltas out{std::vector<double>(per_m[0].theta.size(), 0.0), std::vector<double>(per_m[0].psi.size(), 0.0)};
  for (const auto& d : per_m) {
    if (d.theta.size() != out.theta.size() || d.psi.size() != out.psi.size())
      throw ArgumentError("mean_deltas: dimension mismatch");
    for (std::size_t c = 0; c < d.theta.size(); ++c) out.theta[c] += d.theta[c];
    for (std::size_t c = 0; c < d.psi.size(); ++c) out.psi[c] += d.psi[c];
  }
  const double inv = 1.0 / static_cast<double>(per_m.size());
  for (auto& v : out.theta) v *= inv;
  for (auto& v : out.psi) v *= inv;
  return out;
}

/// theta += alpha_theta(j) * mean Delta theta; psi likewise.
inline void apply_update(std::vector<double>& theta, std::vector<double>& psi, const Deltas& mean,
                         const Schedule& alpha_theta, const Schedule& alpha_psi, int j) {
  const auto at = alpha_theta.at(j);
  const auto ap = alpha_psi.at(j);
  if (at.size() != theta.size() || ap.size() != psi.size() || mean.theta.size() != theta.size() ||
      mean.psi.size() != psi.size())
    throw ArgumentError("apply_update: dimension mismatch");
  for (std::size_t c = 0; c < theta.size(); ++c) theta[c] += at[c] * mean.theta[c];
  for (std::size_t c = 0; c < psi.size(); ++c) psi[c] += ap[c] * mean.psi[c];
}

/// Stacked (theta, psi) DAMOC left-hand side over a batch of rollouts.
template <ModelFamily M>
std::vector<double> damoc_residual(const M& model, std::span<const double> theta, std::span<const double> psi,
                                   std::span<const Rollout> batch, const TimeGrid& grid) {
  if (batch.empty()) throw ArgumentError("damoc_residual: empty batch");
  std::vector<Deltas> per(batch.size());
  for (std::size_t m = 0; m < batch.size(); ++m) per[m] = episode_deltas(model, theta, psi, batch[m], grid);
  const Deltas mean = mean_deltas(per);
  std::vector<double> out = mean.theta;
  out.insert(out.end(), mean.psi.begin(), mean.psi.end());
  return out;
}

struct TrainConfig {
  TimeGrid grid{1.0, 1};
  int episodes = 0;
  int policies = 1;
  Schedule alpha_theta;
  Schedule alpha_psi;
  TestPolicyRule test_rule;
  MeanFlowRule mean_rule;
  std::vector<double> theta0;
  std::vector<double> psi0;
  std::uint64_t seed = 0;
  int threads = 1;
  int ensemble_size = 0;  // 0: use the model's default when it needs one
};

struct EpisodeStats {
  double mean_abs_g = 0.0;
  double theta_step = 0.0;
  double psi_step = 0.0;
};

struct TrainReport {
  std::vector<double> theta0, psi0;
  std::vector<std::vector<double>> theta;  // after episode j = 1..N
  std::vector<std::vector<double>> psi;
  std::vector<EpisodeStats> stats;
  std::vector<double> final_theta, final_psi;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

/// Called after each episode with (j, theta, psi).
using EpisodeObserver = std::function<void(int, const std::vector<double>&, const std::vector<double>&)>;

template <ModelFamily M>
int default_ensemble_size(const M& model) {
  if constexpr (requires { model.env().ensemble_size; })
    return model.env().ensemble_size;
  else
    return 0;
}

/// Builds the true-mean ensemble for test policy m of episode j, if the model needs one.
template <ModelFamily M>
std::optional<Ensemble<M>> make_ensemble(const M& model, std::span<const double> psi_tilde, int size,
                                         std::uint64_t seed, std::uint64_t purpose, int j, int m) {
  if constexpr (M::needs_true_mean) {
    return Ensemble<M>(model, std::vector<double>(psi_tilde.begin(), psi_tilde.end()), size,
                       RngStream(seed, stream_id({kStreamEnsemble, purpose, static_cast<std::uint64_t>(j),
                                                  static_cast<std::uint64_t>(m)})));
  } else {
    (void)model, (void)psi_tilde, (void)size, (void)seed, (void)purpose, (void)j, (void)m;
    return std::nullopt;
  }
}

template <ModelFamily M>
TrainReport train(const M& model, const TrainConfig& cfg, const EpisodeObserver& observer = {}) {
  const auto start = std::chrono::steady_clock::now();
  if (cfg.episodes < 0) throw ArgumentError("train: episode count must be >= 0");
  if (cfg.policies < 1) throw ArgumentError("train: need at least one test policy");
  if (cfg.theta0.size() != model.theta_dim() || cfg.psi0.size() != model.psi_dim())
    throw ArgumentError("train: initial parameter dimension mismatch");
  if (cfg.episodes > 0 && (cfg.alpha_theta.dim() != model.theta_dim() || cfg.alpha_psi.dim() != model.psi_dim()))
    throw ArgumentError("train: learning-rate schedule width mismatch");
  const int ens_size = cfg.ensemble_size > 0 ? cfg.ensemble_size : default_ensemble_size(model);

  TrainReport rep;
  rep.seed = cfg.seed;
  rep.theta0 = cfg.theta0;
  rep.psi0 = cfg.psi0;
  std::vector<double> theta = cfg.theta0;
  std::vector<double> psi = cfg.psi0;
  MeanFlow flow(cfg.grid.steps(), cfg.policies, model.initial_mean(), cfg.mean_rule);
  const int M_ = cfg.policies;
  std::vector<Deltas> per(M_);
  std::vector<double> abs_g(M_);
  std::vector<std::exception_ptr> errors(M_);
  rep.theta.reserve(cfg.episodes);
  rep.psi.reserve(cfg.episodes);
  rep.stats.reserve(cfg.episodes);

  for (int j = 1; j <= cfg.episodes; ++j) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(cfg.threads > 0 ? cfg.threads : 1)
#endif
    for (int m = 0; m < M_; ++m) {
      try {
        const auto uj = static_cast<std::uint64_t>(j);
        const auto um = static_cast<std::uint64_t>(m);
        RngStream rng_psi(cfg.seed, stream_id({kStreamTestPolicy, uj, um}));
        const auto psi_tilde = draw_test_params(rng_psi, psi, cfg.test_rule, j);
        RngStream rng(cfg.seed, stream_id({kStreamRollout, uj, um}));
        auto ens = make_ensemble(model, psi_tilde, ens_size, cfg.seed, kStreamRollout, j, m);
        const Rollout ro = rollout(model, cfg.grid, psi_tilde, flow, m, j, rng, ens ? &*ens : nullptr);
        const auto g = increments(model, theta, psi, ro, cfg.grid);
        double s = 0.0;
        for (double v : g) s += std::abs(v);
        abs_g[m] = s / static_cast<double>(g.size());
        per[m] = deltas_from_increments(model, theta, psi, ro, g, cfg.grid);
        errors[m] = nullptr;
      } catch (...) {
        errors[m] = std::current_exception();
      }
    }
    for (int m = 0; m < M_; ++m) {
      if (!errors[m]) continue;
      try {
        std::rethrow_exception(errors[m]);
      } catch (const std::exception& e) {
        throw TrainingError(j, "test policy " + std::to_string(m) + ": " + e.what());
      }
    }
    const Deltas mean = mean_deltas(per);
    const std::vector<double> theta_prev = theta, psi_prev = psi;
    apply_update(theta, psi, mean, cfg.alpha_theta, cfg.alpha_psi, j);
    for (double v : theta)
      if (!std::isfinite(v)) throw TrainingError(j, "non-finite theta after update");
    for (double v : psi)
      if (!std::isfinite(v)) throw TrainingError(j, "non-finite psi after update");
    EpisodeStats st;
    for (double v : abs_g) st.mean_abs_g += v;
    st.mean_abs_g /= M_;
    for (std::size_t c = 0; c < theta.size(); ++c) st.theta_step += (theta[c] - theta_prev[c]) * (theta[c] - theta_prev[c]);
    for (std::size_t c = 0; c < psi.size(); ++c) st.psi_step += (psi[c] - psi_prev[c]) * (psi[c] - psi_prev[c]);
    st.theta_step = std::sqrt(st.theta_step);
    st.psi_step = std::sqrt(st.psi_step);
    rep.theta.push_back(theta);
    rep.psi.push_back(psi);
    rep.stats.push_back(st);
    if (observer) observer(j, theta, psi);
  }
  rep.final_theta = theta;
  rep.final_psi = psi;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

/// Rollouts under test policies drawn around psi_base, with the agent's
/// mean taken from a self-consistent ensemble of the same test policy.
/// Used for DAMOC residuals at fixed parameters.
template <ModelFamily M>
std::vector<Rollout> simulate_batch(const M& model, const TimeGrid& grid, std::span<const double> psi_base,
                                    const TestPolicyRule& rule, int j, int count, int ensemble_size,
                                    std::uint64_t seed, int threads = 1) {
  if (count < 1) throw ArgumentError("simulate_batch: count must be >= 1");
  if (ensemble_size < 1) throw ArgumentError("simulate_batch: ensemble size must be >= 1");
  std::vector<Rollout> out(count);
  std::vector<std::exception_ptr> errors(count);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads > 0 ? threads : 1)
#endif
  for (int m = 0; m < count; ++m) {
    try {
      const auto um = static_cast<std::uint64_t>(m);
      RngStream rng_psi(seed, stream_id({kStreamBatch, kStreamTestPolicy, um}));
      const auto psi_tilde = draw_test_params(rng_psi, psi_base, rule, j);
      Ensemble<M> ens(model, psi_tilde, ensemble_size, RngStream(seed, stream_id({kStreamBatch, kStreamEnsemble, um})));
      RngStream rng(seed, stream_id({kStreamBatch, kStreamRollout, um}));
      std::vector<double> means(grid.steps() + 1);
      int last = -1;
      auto mean_at = [&](int k, double) {
        while (last < k) {
          if (last >= 0) ens.step(grid.t(last), grid.dt());
          ++last;
          means[last] = ens.mean();
        }
        return means[k];
      };
      // mean_at advances the ensemble; the agent's mean doubles as the true mean.
      out[m] = rollout_with(model, grid, psi_tilde, mean_at, rng, static_cast<Ensemble<M>*>(nullptr));
      errors[m] = nullptr;
    } catch (...) {
      errors[m] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace mfq
