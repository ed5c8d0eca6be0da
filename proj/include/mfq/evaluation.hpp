#pragma once

// Population-level evaluation: value error against the true parameters,
// price of anarchy between MFC and MFG policies, and the martingale test.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfq/errors.hpp"
#include "mfq/model.hpp"
#include "mfq/numerics.hpp"
#include "mfq/params.hpp"
#include "mfq/trainer.hpp"

namespace mfq {

enum class ActionMode { PolicyMean, Sample };

/// P agents playing one policy against their empirical mean. Agent i uses
/// noise stream (seed, i) and a separate action stream, so two populations
/// built with the same seed share Brownian and Poisson realizations.
struct PopulationPath {
  std::vector<std::vector<double>> states;     // [k][i], k = 0..K
  std::vector<std::vector<double>> actions;    // [k][i], k = 0..K-1
  std::vector<std::vector<double>> rewards;    // [k][i]
  std::vector<std::vector<double>> entropies;  // [k][i]
  std::vector<double> means;                   // [k]
};

inline double vector_mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

template <ModelFamily M>
PopulationPath simulate_population(const M& model, std::span<const double> psi, const TimeGrid& grid, int agents,
                                   std::uint64_t seed, ActionMode mode, bool want_entropy = false) {
  if (agents < 1) throw ArgumentError("population size must be >= 1");
  const int K = grid.steps();
  const double dt = grid.dt();
  PopulationPath p;
  p.states.assign(K + 1, std::vector<double>(agents));
  p.actions.assign(K, std::vector<double>(agents));
  p.rewards.assign(K, std::vector<double>(agents));
  if (want_entropy) p.entropies.assign(K, std::vector<double>(agents));
  p.means.resize(K + 1);
  std::vector<RngStream> noise, act;
  noise.reserve(agents);
  act.reserve(agents);
  for (int i = 0; i < agents; ++i) {
    const auto ui = static_cast<std::uint64_t>(i);
    noise.emplace_back(seed, stream_id({kStreamEvaluation, 0, ui}));
    act.emplace_back(seed, stream_id({kStreamEvaluation, 1, ui}));
    p.states[0][i] = model.initial_state(noise.back());
  }
  for (int k = 0; k < K; ++k) {
    const double t = grid.t(k);
    const double mu = vector_mean(p.states[k]);
    p.means[k] = mu;
    for (int i = 0; i < agents; ++i) {
      const double x = p.states[k][i];
      const auto pol = model.policy(psi, t, x, mu);
      const double a = mode == ActionMode::PolicyMean ? pol.mean() : pol.sample(act[i]);
      const Noise nz = model.draw_noise(dt, noise[i]);
      auto redraw = [&](double xm) {
        const auto pm = model.policy(psi, t, xm, mu);
        return mode == ActionMode::PolicyMean ? pm.mean() : pm.sample(act[i]);
      };
      const StepResult st = transition(model, t, x, a, dt, nz, mu, redraw);
      if (!std::isfinite(st.x_next)) throw RolloutError(k, x, a, "non-finite state in population");
      p.states[k + 1][i] = st.x_next;
      p.actions[k][i] = a;
      p.rewards[k][i] = st.reward;
      if (want_entropy) p.entropies[k][i] = pol.entropy();
    }
  }
  p.means[K] = vector_mean(p.states[K]);
  return p;
}

/// sqrt(sum_k mean_i |J_hat - J_star|^2) over nodes k = 0..K; with
/// literal = true the square is dropped inside the sum.
template <ModelFamily M>
double evaluate_value_error(const M& model, std::span<const double> theta_hat, std::span<const double> psi_hat,
                            std::span<const double> theta_star, std::span<const double> psi_star, int agents,
                            const TimeGrid& grid, std::uint64_t seed, bool literal = false) {
  if (agents < 1) throw ArgumentError("evaluate_value_error: population size must be >= 1");
  const auto a = simulate_population(model, psi_hat, grid, agents, seed, ActionMode::PolicyMean);
  const auto b = simulate_population(model, psi_star, grid, agents, seed, ActionMode::PolicyMean);
  double total = 0.0;
  for (int k = 0; k <= grid.steps(); ++k) {
    const double t = grid.t(k);
    double acc = 0.0;
    for (int i = 0; i < agents; ++i) {
      const double d = model.value(theta_hat, t, a.states[k][i], a.means[k]) -
                       model.value(theta_star, t, b.states[k][i], b.means[k]);
      acc += literal ? std::abs(d) : d * d;
    }
    total += acc / agents;
  }
  return std::sqrt(total);
}

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  long long samples = 0;
};

/// Per-agent cumulative payoff sum_k (r + gamma H(pi)) dt + g(X_T, mu_T).
template <ModelFamily M>
std::vector<double> population_payoffs(const M& model, std::span<const double> psi, const TimeGrid& grid, int agents,
                                       std::uint64_t seed) {
  const auto p = simulate_population(model, psi, grid, agents, seed, ActionMode::Sample, true);
  const double dt = grid.dt();
  const double g = model.temperature();
  std::vector<double> out(agents, 0.0);
  for (int k = 0; k < grid.steps(); ++k)
    for (int i = 0; i < agents; ++i) out[i] += (p.rewards[k][i] + g * p.entropies[k][i]) * dt;
  for (int i = 0; i < agents; ++i) out[i] += model.terminal(p.states[grid.steps()][i], p.means[grid.steps()]);
  return out;
}

/// (payoff under the MFC-side policy) - (payoff under the MFG-side policy)
/// at t = 0, with common random numbers; stderr from paired differences.
template <ModelFamily A, ModelFamily B>
Estimate price_of_anarchy(const A& mfc, std::span<const double> psi_mfc, const TimeGrid& grid_mfc, const B& mfg,
                          std::span<const double> psi_mfg, const TimeGrid& grid_mfg, int agents, std::uint64_t seed) {
  if (!(grid_mfc == grid_mfg)) throw ArgumentError("price_of_anarchy: grids differ");
  if (mfc.horizon() != mfg.horizon()) throw ArgumentError("price_of_anarchy: horizons differ");
  if (agents < 2) throw ArgumentError("price_of_anarchy: need at least 2 agents");
  const auto pc = population_payoffs(mfc, psi_mfc, grid_mfc, agents, seed);
  const auto pg = population_payoffs(mfg, psi_mfg, grid_mfg, agents, seed);
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < agents; ++i) {
    const double d = pc[i] - pg[i];
    s += d;
    s2 += d * d;
  }
  const double mean = s / agents;
  const double var = std::max(0.0, (s2 - agents * mean * mean) / (agents - 1));
  return {mean, std::sqrt(var / agents), agents};
}

struct MartingaleResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  long long steps = 0;
  bool pass = false;
};

/// G-increments of (theta, psi_q) along populations playing psi_play with
/// sampled actions. Standard error from batch means over the populations.
template <ModelFamily M>
MartingaleResult martingale_test(const M& model, std::span<const double> theta, std::span<const double> psi_q,
                                 std::span<const double> psi_play, const TimeGrid& grid, int populations, int agents,
                                 std::uint64_t seed, double z = 3.0) {
  if (populations < 2) throw ArgumentError("martingale_test: need at least 2 populations");
  std::vector<double> batch(populations);
  for (int r = 0; r < populations; ++r) {
    const auto p = simulate_population(model, psi_play, grid, agents,
                                       stream_id({seed, static_cast<std::uint64_t>(r)}), ActionMode::Sample);
    double acc = 0.0;
    for (int k = 0; k < grid.steps(); ++k) {
      const double t = grid.t(k);
      const double h = model.mf_moment(psi_play, t, p.means[k]);
      for (int i = 0; i < agents; ++i) {
        const TransitionSample s{k, p.states[k][i], p.actions[k][i], p.means[k], p.rewards[k][i], p.states[k + 1][i],
                                 p.means[k + 1]};
        acc += g_increment(model, theta, psi_q, s, h, grid);
      }
    }
    batch[r] = acc / (static_cast<double>(agents) * grid.steps());
  }
  double s = 0.0, s2 = 0.0;
  for (double b : batch) {
    s += b;
    s2 += b * b;
  }
  MartingaleResult res;
  res.mean = s / populations;
  res.stderr_ = std::sqrt(std::max(0.0, (s2 - populations * res.mean * res.mean) / (populations - 1)) / populations);
  res.steps = static_cast<long long>(populations) * agents * grid.steps();
  res.pass = std::abs(res.mean) <= z * res.stderr_;
  return res;
}

}  // namespace mfq
