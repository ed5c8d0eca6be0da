#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mfq/mv_model.hpp"

using namespace mfq;
using namespace mfq::mv;

namespace {

const MVEnvParams kEnv{};

double fd(auto&& f, std::vector<double> p, std::size_t i) {
  const double h = 1e-5 * (1.0 + std::abs(p[i]));
  p[i] += h;
  const double up = f(p);
  p[i] -= 2.0 * h;
  return (up - f(p)) / (2.0 * h);
}

}  // namespace

TEST(MVStep, NoPositionNoChange) {
  RngStream rng(1, 1);
  for (int i = 0; i < 100; ++i) {
    const auto s = mv_step(kEnv, 1.7, 0.0, rng, 0.002);
    EXPECT_EQ(s.x_next, 1.7);
    EXPECT_EQ(s.reward, 0.0);
  }
}

TEST(MVStep, DriftOnly) {
  const auto s = mv_step_with(kEnv, 1.0, 1.0, 0.002, Noise{0.0, 0});
  EXPECT_NEAR(s.x_next, 1.0 - 0.0005, 1e-15);
}

TEST(MVStep, CompensatedJumpsHaveZeroMean) {
  RngStream rng(5, 2);
  const int n = 1000000;
  const double dt = 0.002;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = mv_step(kEnv, 0.0, 1.0, rng, dt).x_next;
    s += d;
    s2 += d * d;
  }
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, kEnv.b * dt, 3.0 * se);
}

TEST(MVStep, RejectsNonPositiveStep) {
  RngStream rng(1, 1);
  EXPECT_THROW(mv_step(kEnv, 1.0, 1.0, rng, 0.0), ArgumentError);
}

TEST(MVValue, TerminalConditionForAnyTheta) {
  EXPECT_DOUBLE_EQ(mv_value({0.3, -2.0}, 2.0, 0.5, 1.0, 1.0, 0.5, 1.0), 0.5);
  RngStream rng(2, 1);
  for (int i = 0; i < 200; ++i) {
    const MVTheta th{sample_uniform(rng, -3, 3), sample_uniform(rng, -3, 3)};
    const double x = sample_uniform(rng, -5, 5), mu = sample_uniform(rng, -5, 5);
    EXPECT_NEAR(mv_value(th, 2.0, 0.5, 1.0, x, mu, 1.0), mv_terminal(2.0, x, mu), 1e-12);
  }
}

TEST(MVValue, ZeroThetaOneReducesToLinearTerm) {
  EXPECT_NEAR(mv_value({0.0, 0.37}, 2.0, 0.5, 0.0, 0.0, 0.0, 1.0), -0.37, 1e-15);
}

TEST(MVValue, GradientSpotValues) {
  RngStream rng(2, 2);
  for (int i = 0; i < 50; ++i) {
    const MVTheta th{sample_uniform(rng, -1, 1), sample_uniform(rng, -1, 1)};
    const double t = sample_uniform(rng, 0, 1), x = sample_uniform(rng, -2, 2), mu = sample_uniform(rng, -2, 2);
    const auto g = mv_grad_value(th, 2.0, 0.5, t, x, mu, 1.0);
    EXPECT_DOUBLE_EQ(g[1], t - 1.0);
    EXPECT_NEAR(mv_grad_value(th, 2.0, 0.5, 1.0, x, mu, 1.0)[0], 0.0, 1e-15);
  }
}

TEST(MVValue, GradientMatchesFiniteDifference) {
  const MVModel m;
  RngStream rng(3, 1);
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> th = {sample_uniform(rng, -1, 1), sample_uniform(rng, -1, 1)};
    const double t = sample_uniform(rng, 0, 1), x = sample_uniform(rng, -2, 3), mu = sample_uniform(rng, -2, 3);
    std::vector<double> g(2);
    m.value_grad(th, t, x, mu, g);
    for (std::size_t c = 0; c < 2; ++c) {
      const double num = fd([&](const std::vector<double>& p) { return m.value(p, t, x, mu); }, th, c);
      EXPECT_LE(std::abs(g[c] - num), 1e-5 * std::max(1e-6, std::abs(num)) + 1e-9) << i << ' ' << c;
    }
  }
}

TEST(MVQ, CompletedSquareRoot) {
  const MVPsi ps{0.4, 0.3, 0.8, -0.2};
  const double t = 0.3, tau = t - 1.0, g = 0.5;
  const double a = -ps.psi4 * std::exp(-ps.psi2 * tau);
  const double want = -0.5 * g * std::log(2.0 * std::numbers::pi * g) + 0.5 * g * ps.psi1 + 0.5 * ps.psi2 * g * tau;
  EXPECT_NEAR(mv_q(ps, g, t, 1.2, 1.2, a, 0.7, 1.0), want, 1e-14);
}

TEST(MVQ, GibbsNormalizationOnDiagonal) {
  RngStream rng(3, 2);
  for (int i = 0; i < 20; ++i) {
    const MVPsi ps{sample_uniform(rng, -1, 1), sample_uniform(rng, -1, 1), sample_uniform(rng, -1, 1),
                   sample_uniform(rng, 0.1, 1)};
    const double t = sample_uniform(rng, 0, 1), x = sample_uniform(rng, -1, 2), h = sample_uniform(rng, -1, 1);
    const auto pol = mv_policy(ps, 0.5, t, x, x, 1.0);
    const double sd = std::sqrt(pol.variance());
    const double z = integrate_panels([&](double a) { return std::exp(mv_q(ps, 0.5, t, x, x, a, h, 1.0) / 0.5); },
                                      pol.mean() - 8.0 * sd, pol.mean() + 8.0 * sd, 16, 32);
    EXPECT_NEAR(z, 1.0, 1e-10);
  }
}

TEST(MVQ, GradientMatchesFiniteDifferenceIncludingPsi5) {
  const MVModel m;
  RngStream rng(3, 3);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> ps = {sample_uniform(rng, -1, 1), sample_uniform(rng, -1, 1), sample_uniform(rng, -1, 1),
                              sample_uniform(rng, 0.1, 1)};
    if (i % 2) ps[3] = -ps[3];
    const double t = sample_uniform(rng, 0, 1), x = sample_uniform(rng, -2, 3), mu = sample_uniform(rng, -2, 3);
    const double a = sample_uniform(rng, -2, 2), h = sample_uniform(rng, -1, 1);
    std::vector<double> g(4);
    m.q_grad(ps, t, x, mu, a, h, g);
    for (std::size_t c = 0; c < 4; ++c) {
      const double num = fd([&](const std::vector<double>& p) { return m.q(p, t, x, mu, a, h); }, ps, c);
      EXPECT_LE(std::abs(g[c] - num), 1e-5 * std::max(1.0, std::abs(num))) << i << ' ' << c;
    }
  }
}

TEST(MVQ, RejectsZeroPsi4) {
  const MVModel m;
  const std::vector<double> ps = {0.0, 0.1, 0.2, 0.0};
  EXPECT_THROW(m.q(ps, 0.0, 1.0, 1.0, 0.0, 0.0), DomainError);
  EXPECT_THROW(m.q(std::vector<double>{0.0, 0.1, 0.2}, 0.0, 1.0, 1.0, 0.0, 0.0), ArgumentError);
}

TEST(MVPolicy, TrueParamsAtTerminalTime) {
  const auto tp = mv_true_params(kEnv);
  const auto pol = mv_policy(tp.psi, kEnv.gamma, 1.0, 1.0, 1.0, 1.0);
  EXPECT_NEAR(pol.mean(), 0.125, 1e-15);
  EXPECT_NEAR(pol.variance(), 0.25, 1e-15);
}

TEST(MVPolicy, ShiftInvarianceAndStateFreeVariance) {
  const MVPsi ps{0.3, -0.4, 0.9, 0.2};
  RngStream rng(4, 1);
  for (int i = 0; i < 100; ++i) {
    const double t = sample_uniform(rng, 0, 1), x = sample_uniform(rng, -3, 3), mu = sample_uniform(rng, -3, 3);
    const double c = sample_uniform(rng, -10, 10);
    const auto p = mv_policy(ps, 0.5, t, x, mu, 1.0), q = mv_policy(ps, 0.5, t, x + c, mu + c, 1.0);
    EXPECT_NEAR(p.mean(), q.mean(), 1e-12);
    EXPECT_EQ(p.variance(), mv_policy(ps, 0.5, t, 0.0, 0.0, 1.0).variance());
  }
}

TEST(MVPolicy, VarianceShrinksWithJumpRisk) {
  double prev = INFINITY;
  for (double eta : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    MVEnvParams env;
    env.eta = eta;
    const auto tp = mv_true_params(env);
    const double v = mv_policy(tp.psi, env.gamma, 0.4, 1.0, 1.0, 1.0).variance();
    EXPECT_LT(v, prev) << eta;
    prev = v;
  }
}

TEST(MVPolicy, MomentIsPolicyMeanOnDiagonal) {
  const MVPsi ps{0.3, -0.4, 0.9, 0.2};
  for (double t : {0.0, 0.5, 1.0})
    EXPECT_DOUBLE_EQ(mv_action_moment(ps, t, 1.0), mv_policy(ps, 0.5, t, 2.0, 2.0, 1.0).mean());
}

TEST(MVTrueParams, TableValues) {
  const auto tp = mv_true_params(kEnv);
  EXPECT_NEAR(tp.theta.theta1, 0.125, 1e-15);
  EXPECT_NEAR(tp.theta.theta2, -0.25 * std::log(std::numbers::pi / 2.0), 1e-15);
  EXPECT_NEAR(tp.psi.psi1, std::log(2.0), 1e-15);
  EXPECT_NEAR(tp.psi.psi2, 0.125, 1e-15);
  EXPECT_NEAR(tp.psi.psi3, 0.5, 1e-15);
  EXPECT_NEAR(tp.psi.psi4, -0.125, 1e-15);
  EXPECT_NEAR(tp.psi.psi5(), 1.0, 1e-15);
}

TEST(MVModel, InitialStateAndValidation) {
  RngStream rng(1, 1);
  EXPECT_EQ(MVModel().initial_state(rng), 1.0);
  MVEnvParams bad;
  bad.sigma = 0.0;
  EXPECT_THROW(MVModel{bad}, ArgumentError);
  bad = {};
  bad.lambda = -1.0;
  EXPECT_THROW(MVModel{bad}, ArgumentError);
  MVEnvParams spread;
  spread.x0_sd = 0.5;
  const MVModel m(spread);
  double s = 0.0;
  for (int i = 0; i < 40000; ++i) s += m.initial_state(rng);
  EXPECT_NEAR(s / 40000, 1.0, 4.0 * 0.5 / 200.0);
}
