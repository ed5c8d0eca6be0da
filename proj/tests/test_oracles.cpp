#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mfq/jump_models.hpp"
#include "mfq/mv_model.hpp"
#include "mfq/oracles.hpp"

using namespace mfq;
using namespace mfq::oracle;

namespace {

std::vector<double> uniform_times(int n, double T) {
  std::vector<double> t(n);
  RngStream rng(21, 1);
  for (auto& v : t) v = sample_uniform(rng, 0.01, T - 0.01);
  return t;
}

}  // namespace

TEST(ClosedForm, MFGConstants) {
  const JumpClosedForm cf(jump::JumpEnvParams{}, false);
  const auto K = cf.constants();
  EXPECT_NEAR(K[0], -0.5 * (0.25 / 3.0 - 1.0), 1e-15);
  EXPECT_NEAR(K[0], 0.4583, 5e-5);
  EXPECT_NEAR(K[2], 4.0 / 3.0, 1e-15);
}

TEST(ClosedForm, MFCConstants) {
  const JumpClosedForm cf(jump::JumpEnvParams{}, true);
  const auto K = cf.constants();
  EXPECT_NEAR(K[3], 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(K[2], 0.5 / 1.5, 1e-15);
}

TEST(ClosedForm, TerminalValues) {
  const MVClosedForm mv(mv::MVEnvParams{});
  const JumpClosedForm mfg(jump::JumpEnvParams{}, false), mfc(jump::JumpEnvParams{}, true);
  RngStream rng(1, 1);
  for (int i = 0; i < 50; ++i) {
    const double x = sample_uniform(rng, 0.1, 3), mu = sample_uniform(rng, 0.1, 3);
    EXPECT_NEAR(mv.value(1.0, x, mu), x - 2.0 * (x - mu) * (x - mu), 1e-14);
    EXPECT_NEAR(mfg.value(1.0, x, mu), std::log(x / mu), 1e-14);
    EXPECT_NEAR(mfc.value(1.0, x, mu), std::log(x / mu), 1e-14);
  }
  EXPECT_DOUBLE_EQ(mfg.A(1.0), 1.0);
  for (double t : {0.0, 0.3, 0.9}) EXPECT_EQ(mfg.A(t), -mfg.B(t));
}

TEST(ClosedForm, ParameterizationMatchesAtTrueParams) {
  EXPECT_LE(verify_parameterization(ModelId::MV, 1000).max(), 1e-10);
  EXPECT_LE(verify_parameterization(ModelId::JumpMFG, 1000).max(), 1e-9);
  EXPECT_LE(verify_parameterization(ModelId::JumpMFC, 1000).max(), 1e-9);
}

TEST(ClosedForm, OdeResiduals) {
  const auto ts = uniform_times(200, 1.0);
  for (ModelId id : {ModelId::MV, ModelId::JumpMFG, ModelId::JumpMFC}) {
    const auto r = ode_residual(id, ts);
    EXPECT_LE(r.A, 1e-12) << to_string(id);
    EXPECT_LE(r.B, 1e-12) << to_string(id);
    EXPECT_LE(r.C, 1e-9) << to_string(id);
  }
}

TEST(ClosedForm, OdeResidualDetectsWrongCoefficients) {
  jump::JumpEnvParams env;
  const JumpClosedForm good(env, false);
  env.sigma = 0.6;
  const JumpClosedForm other(env, false);
  double worst = 0.0;
  for (double t : uniform_times(20, 1.0)) {
    const double d = fd5([&](double s) { return good.C(s); }, t, 1e-3) - other.C_rhs(t);
    worst = std::max(worst, std::abs(d));
  }
  EXPECT_GT(worst, 1e-3);
}

TEST(ClosedForm, PoliciesMatchParameterizedPolicies) {
  const mv::MVModel mvm;
  const jump::MFGModel mfg;
  const jump::MFCModel mfc;
  const MVClosedForm mvc(mvm.env());
  const JumpClosedForm gc(mfg.env(), false), cc(mfc.env(), true);
  RngStream rng(2, 1);
  for (int i = 0; i < 100; ++i) {
    const double t = sample_uniform(rng, 0, 1);
    const double x = std::exp(sample_uniform(rng, -1, 1)), mu = std::exp(sample_uniform(rng, -1, 1));
    const auto a = mvc.policy(t, x, mu), b = mvm.policy(mvm.true_psi(), t, x, mu);
    EXPECT_NEAR(a.mean(), b.mean(), 1e-12);
    EXPECT_NEAR(a.variance(), b.variance(), 1e-12);
    const auto g1 = gc.policy(t, x, mu), g2 = mfg.policy(mfg.true_psi(), t, x, mu);
    EXPECT_NEAR(g1.shape, g2.shape, 1e-12 * g1.shape);
    EXPECT_NEAR(g1.rate, g2.rate, 1e-12 * g1.rate);
    const auto c1 = cc.policy(t, x, mu), c2 = mfc.policy(mfc.true_psi(), t, x, mu);
    EXPECT_NEAR(c1.shape, c2.shape, 1e-12 * c1.shape);
    EXPECT_NEAR(c1.rate, c2.rate, 1e-12 * c1.rate);
  }
}

TEST(ClosedForm, MVEquilibriumAndOptimumCoincide) {
  // one parameterized policy serves both problems; its closed form has no game or control switch
  const MVClosedForm cf(mv::MVEnvParams{});
  const mv::MVModel m;
  const auto tp = mv::mv_true_params(m.env());
  RngStream rng(2, 2);
  for (int i = 0; i < 100; ++i) {
    const double t = sample_uniform(rng, 0, 1), x = sample_uniform(rng, -2, 3), mu = sample_uniform(rng, -2, 3);
    const auto a = cf.policy(t, x, mu), b = mv::mv_policy(tp.psi, m.env().gamma, t, x, mu, 1.0);
    EXPECT_NEAR(a.mean(), b.mean(), 1e-12);
    EXPECT_NEAR(a.variance(), b.variance(), 1e-12);
  }
}

TEST(ClosedForm, TrueMFGPolicyMeanMatchesSampling) {
  const jump::JumpEnvParams env;
  const JumpClosedForm cf(env, false);
  RngStream rng(3, 1);
  for (double t : {0.0, 0.5, 1.0}) {
    const auto pol = cf.policy(t, 1.3, 1.3);
    const double want = (env.eta / env.gamma + 1.0) * std::exp(env.eta * (t - 1.0)) * env.gamma / env.r0 - 1.0;
    EXPECT_NEAR(pol.mean(), want, 1e-12);
    const int n = 200000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += pol.sample(rng);
    EXPECT_NEAR(s / n, want, 3.0 * std::sqrt(pol.variance() / n)) << t;
  }
}

TEST(Consistency, JumpIdentitiesAtTrueParams) {
  const jump::MFGModel mfg;
  const jump::MFCModel mfc;
  RngStream rng(4, 1);
  auto phi = [](double y) { return y; };
  for (int i = 0; i < 20; ++i) {
    const double t = sample_uniform(rng, 0, 1);
    std::vector<double> pop(5);
    for (auto& y : pop) y = std::exp(sample_uniform(rng, -0.5, 0.5));
    const double x = pop[2];
    const auto g = consistency_check(mfg, mfg.true_psi(), t, x, pop, false, phi);
    EXPECT_LE(g.normalization, 1e-10);
    EXPECT_LE(g.gibbs, 1e-7);
    EXPECT_LE(g.value, 1e-7);
    const auto c = consistency_check(mfc, mfc.true_psi(), t, x, pop, true, phi);
    EXPECT_LE(c.normalization, 1e-10);
    EXPECT_LE(c.gibbs, 1e-7);
    EXPECT_LE(c.value, 1e-7);
  }
}

namespace {

// q shifted by a constant breaks the normalized Gibbs form
struct ShiftedQ : jump::MFGModel {
  double q(std::span<const double> ps, double t, double x, double mu, double a, double h) const {
    return jump::MFGModel::q(ps, t, x, mu, a, h) + 0.1;
  }
};

}  // namespace

TEST(Consistency, JumpIdentitiesHoldAcrossPsi) {
  const jump::MFGModel mfg;
  const jump::MFCModel mfc;
  const std::vector<double> pop = {0.8, 1.0, 1.2};
  RngStream rng(4, 7);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> psi = {sample_uniform(rng, -1.0, 1.5), sample_uniform(rng, -1.0, 1.0),
                                     sample_uniform(rng, -1.0, 1.0)};
    const double t = sample_uniform(rng, 0.0, 0.99), x = sample_uniform(rng, 0.5, 2.0);
    const auto g = consistency_check(mfg, psi, t, x, pop, false, [](double y) { return y; });
    const auto c = consistency_check(mfc, psi, t, x, pop, true, [](double y) { return y; });
    EXPECT_LE(std::max({g.normalization, g.gibbs, g.value}), 1e-7);
    EXPECT_LE(std::max({c.normalization, c.gibbs, c.value}), 1e-7);
  }
}

TEST(Consistency, DetectsUnnormalizedQ) {
  const ShiftedQ m;
  const std::vector<double> pop = {0.8, 1.0, 1.2};
  const auto r = consistency_check(m, m.true_psi(), 0.4, 1.0, pop, false, [](double y) { return y; });
  EXPECT_NEAR(r.value, 0.1, 1e-7);
  EXPECT_LE(r.normalization, 1e-10);
}

TEST(Consistency, MVHoldsForArbitraryPsi) {
  const mv::MVModel m;
  RngStream rng(4, 2);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> psi = {sample_uniform(rng, -1, 1), sample_uniform(rng, -1, 1), sample_uniform(rng, -1, 1),
                                     sample_uniform(rng, 0.1, 1) * (i % 2 ? -1.0 : 1.0)};
    const double t = sample_uniform(rng, 0, 1);
    std::vector<double> pop(5);
    for (auto& y : pop) y = sample_uniform(rng, -1, 2);
    const auto r = consistency_check(m, psi, t, pop[1], pop, false, [](double) { return 1.0; });
    EXPECT_LE(r.normalization, 1e-10);
    EXPECT_LE(r.gibbs, 1e-8);
    EXPECT_LE(r.value, 1e-8);
  }
}

TEST(McOracle, DegenerateProblemReturnsTerminalMean) {
  DecoupledProblem p;
  p.gamma = 0.0;
  p.act = [](double, double, double, RngStream&) { return std::pair{0.0, 0.0}; };
  p.step = [](double, double x, double, double dt, double, RngStream& rng) { return x + std::sqrt(dt) * rng.standard_normal(); };
  p.reward = [](double, double, double, double) { return 0.0; };
  p.terminal = [](double x, double) { return x * x; };
  const auto e = mc_value_oracle(p, 0.0, 0.5, 1.0, [](double) { return 0.0; }, 100000, 10, 3);
  // E[(0.5 + W_1)^2] = 1.25
  EXPECT_NEAR(e.value, 1.25, 3.0 * e.stderr_);
  EXPECT_THROW(mc_value_oracle(p, 0.0, 0.5, 1.0, [](double) { return 0.0; }, 1, 10, 3), ArgumentError);
}

TEST(McOracle, MVValueAtStart) {
  const mv::MVEnvParams env;
  const MVClosedForm cf(env);
  const auto e = mc_value_oracle(mv_optimal_problem(env), 0.0, env.x0, env.T,
                                 [&](double s) { return cf.mean_flow(0.0, env.x0, s); }, 100000, 200, 5);
  EXPECT_NEAR(e.value, cf.value(0.0, env.x0, env.x0), 3.0 * e.stderr_);
}

TEST(McOracle, JumpMFGOneStepBeforeHorizon) {
  const jump::JumpEnvParams env;
  const JumpClosedForm cf(env, false);
  const double dt = 0.002, t = env.T - dt;
  const auto e = mc_value_oracle(jump_optimal_problem(env, false), t, 1.0, env.T,
                                 [&](double s) { return cf.mean_flow(t, 1.0, s); }, 100000, 1, 6);
  EXPECT_NEAR(e.value, cf.value(t, 1.0, 1.0), 3.0 * e.stderr_);
}

TEST(ModelIds, RoundTrip) {
  for (ModelId id : {ModelId::MV, ModelId::JumpMFG, ModelId::JumpMFC}) EXPECT_EQ(model_id_from_string(to_string(id)), id);
  EXPECT_THROW(model_id_from_string("lq"), ArgumentError);
}
