#pragma once

// Self-checks shared by the CLI and the acceptance suite: finite-difference
// gradients, consistency identities at random points, martingale tests and
// DAMOC residual scaling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfq/evaluation.hpp"
#include "mfq/jump_models.hpp"
#include "mfq/mv_model.hpp"
#include "mfq/oracles.hpp"
#include "mfq/trainer.hpp"

namespace mfq::diag {

using oracle::ModelId;

inline double relative_error(double analytic, double fd) {
  const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-6});
  return std::abs(analytic - fd) / scale;
}

struct GradientCheck {
  double value = 0.0;  // worst relative error of dJ/dtheta
  double q = 0.0;      // worst relative error of dq/dpsi
  double max() const noexcept { return std::max(value, q); }
};

struct SamplePoint {
  double t, x, mu, a, h;
};

/// Random interior point with the state conventions of each family.
inline SamplePoint sample_point(ModelId id, double T, RngStream& rng) {
  SamplePoint p{};
  p.t = sample_uniform(rng, 0.0, T);
  if (id == ModelId::MV) {
    p.x = sample_uniform(rng, -2.0, 4.0);
    p.mu = sample_uniform(rng, -1.0, 3.0);
    p.a = sample_uniform(rng, -3.0, 3.0);
    p.h = sample_uniform(rng, -2.0, 2.0);
  } else {
    p.x = std::exp(sample_uniform(rng, -1.5, 1.5));
    p.mu = std::exp(sample_uniform(rng, -1.0, 1.0));
    p.a = std::exp(sample_uniform(rng, -3.0, 1.5)) - 1.0;
    p.h = p.mu * sample_uniform(rng, -0.9, 1.0);
  }
  return p;
}

/// Uniform jitter of every component by at most width.
inline std::vector<double> jitter(std::span<const double> base, RngStream& rng, double width) {
  std::vector<double> out(base.begin(), base.end());
  for (auto& v : out) v += width * sample_uniform(rng, -1.0, 1.0);
  return out;
}

template <ModelFamily M>
GradientCheck gradient_check(const M& model, ModelId id, int points, std::uint64_t seed) {
  RngStream rng(seed, stream_id({0x96ad, static_cast<std::uint64_t>(id)}));
  GradientCheck res;
  std::vector<double> gt(model.theta_dim()), gp(model.psi_dim());
  for (int i = 0; i < points; ++i) {
    auto th = jitter(model.true_theta(), rng, 0.3);
    auto ps = jitter(model.true_psi(), rng, 0.3);
    if (id == ModelId::MV && std::abs(ps[3]) < 0.05) ps[3] = ps[3] < 0.0 ? -0.05 : 0.05;
    const auto p = sample_point(id, model.horizon(), rng);
    model.value_grad(th, p.t, p.x, p.mu, gt);
    model.q_grad(ps, p.t, p.x, p.mu, p.a, p.h, gp);
    for (std::size_t c = 0; c < th.size(); ++c) {
      auto up = th, dn = th;
      const double step = 1e-5 * (1.0 + std::abs(th[c]));
      up[c] += step;
      dn[c] -= step;
      const double fd = (model.value(up, p.t, p.x, p.mu) - model.value(dn, p.t, p.x, p.mu)) / (2.0 * step);
      res.value = std::max(res.value, relative_error(gt[c], fd));
    }
    for (std::size_t c = 0; c < ps.size(); ++c) {
      auto up = ps, dn = ps;
      const double step = 1e-5 * (1.0 + std::abs(ps[c]));
      up[c] += step;
      dn[c] -= step;
      const double fd =
          (model.q(up, p.t, p.x, p.mu, p.a, p.h) - model.q(dn, p.t, p.x, p.mu, p.a, p.h)) / (2.0 * step);
      res.q = std::max(res.q, relative_error(gp[c], fd));
    }
  }
  return res;
}

/// Worst residuals of the consistency identities over random (t, x, mu).
/// The population is mu scaled by fixed weights with mean one. With
/// arbitrary_psi the MV free parameters are redrawn at every point.
template <ModelFamily M>
oracle::ConsistencyResult consistency_sweep(const M& model, ModelId id, int points, std::uint64_t seed,
                                            bool arbitrary_psi = false) {
  RngStream rng(seed, stream_id({0xc095, static_cast<std::uint64_t>(id)}));
  const bool mfc = id == ModelId::JumpMFC;
  const double weights[] = {0.7, 0.9, 1.0, 1.1, 1.3};
  oracle::ConsistencyResult worst;
  for (int i = 0; i < points; ++i) {
    const auto p = sample_point(id, model.horizon(), rng);
    std::vector<double> psi = model.true_psi();
    if (arbitrary_psi) {
      psi = {sample_uniform(rng, -1.0, 1.0), sample_uniform(rng, -1.0, 1.0), sample_uniform(rng, -2.0, 2.0),
             sample_uniform(rng, 0.2, 2.0) * (sample_uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0)};
    }
    std::vector<double> pop;
    for (double w : weights) pop.push_back(id == ModelId::MV ? p.mu + (w - 1.0) * 2.0 : p.mu * w);
    const double t = std::min(p.t, model.horizon() * (1.0 - 1e-9));
    oracle::ConsistencyResult r;
    if (id == ModelId::MV)
      r = oracle::consistency_check(model, psi, t, p.x, pop, false, [](double) { return 1.0; });
    else
      r = oracle::consistency_check(model, psi, t, p.x, pop, mfc, [](double y) { return y; });
    worst.normalization = std::max(worst.normalization, r.normalization);
    worst.gibbs = std::max(worst.gibbs, r.gibbs);
    worst.value = std::max(worst.value, r.value);
  }
  return worst;
}

struct MartingaleSuite {
  MartingaleResult truth;
  std::vector<MartingaleResult> perturbed;  // one per psi component
};

/// Martingale test at the true pair, then with psi_i + delta used both for q
/// and for the played policy.
template <ModelFamily M>
MartingaleSuite martingale_suite(const M& model, const TimeGrid& grid, int populations, int agents,
                                 std::uint64_t seed, double delta = 0.5, double z = 3.0) {
  const auto th = model.true_theta();
  const auto ps = model.true_psi();
  MartingaleSuite out;
  out.truth = martingale_test(model, th, ps, ps, grid, populations, agents, seed, z);
  for (std::size_t c = 0; c < ps.size(); ++c) {
    auto pp = ps;
    pp[c] += delta;
    out.perturbed.push_back(martingale_test(model, th, pp, pp, grid, populations, agents, seed, z));
  }
  return out;
}

/// Grid and sample sizes for the martingale test. jump-MFG needs a fine grid:
/// the left-point time discretization adds an O(dt) bias per path that is
/// visible at K=100. jump-MFC needs more agents to reject a psi2 shift.
struct MartingaleSizing {
  int K = 100;
  int populations = 40;
  int agents = 2000;
};

inline MartingaleSizing default_martingale_sizing(ModelId id) {
  switch (id) {
    case ModelId::MV: return {100, 40, 2000};
    case ModelId::JumpMFG: return {1000, 40, 250};
    case ModelId::JumpMFC: return {100, 50, 1000};
  }
  return {};
}

struct DamocScaling {
  std::vector<int> sizes;
  std::vector<double> norms;  // root-mean-square residual norm over replicates
  double slope = 0.0;
};

/// Least-squares slope of log y against log x.
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("loglog_slope: need two or more matching points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// DAMOC residual at (theta, psi) for batches of M test-policy rollouts
/// drawn with the test rule at episode j.
template <ModelFamily M>
DamocScaling damoc_scaling(const M& model, const TimeGrid& grid, std::span<const double> theta,
                           std::span<const double> psi, const TestPolicyRule& rule, std::span<const int> sizes,
                           int replicates, int ensemble_size, std::uint64_t seed, int threads = 1, int j = 1) {
  if (replicates < 1) throw ArgumentError("damoc_scaling: replicates must be >= 1");
  DamocScaling out;
  std::vector<double> xs;
  for (int m : sizes) {
    double acc = 0.0;
    for (int r = 0; r < replicates; ++r) {
      const auto s = stream_id({seed, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(r)});
      const auto batch = simulate_batch(model, grid, psi, rule, j, m, ensemble_size, s, threads);
      const auto res = damoc_residual(model, theta, psi, std::span<const Rollout>(batch), grid);
      for (double v : res) acc += v * v;
    }
    out.sizes.push_back(m);
    out.norms.push_back(std::sqrt(acc / replicates));
    xs.push_back(static_cast<double>(m));
  }
  out.slope = loglog_slope(xs, out.norms);
  return out;
}

}  // namespace mfq::diag
