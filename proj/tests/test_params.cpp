#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mfq/params.hpp"

using namespace mfq;

TEST(TimeGrid, NodesAndStep) {
  const TimeGrid g(1.0, 500);
  EXPECT_DOUBLE_EQ(g.dt(), 0.002);
  EXPECT_EQ(g.t(0), 0.0);
  EXPECT_EQ(g.t(500), 1.0);
  EXPECT_DOUBLE_EQ(g.t(250), 0.5);
  EXPECT_DOUBLE_EQ(g.dt() * g.steps(), g.horizon());
}

TEST(TimeGrid, RejectsBadArguments) {
  EXPECT_THROW(TimeGrid(1.0, 0), ArgumentError);
  EXPECT_THROW(TimeGrid(0.0, 10), ArgumentError);
  EXPECT_THROW(TimeGrid(-1.0, 10), ArgumentError);
  EXPECT_THROW(TimeGrid(NAN, 10), ArgumentError);
}

TEST(ParamVec, NamesMustMatch) {
  EXPECT_THROW(ParamVec({1.0, 2.0}, {"a"}), ArgumentError);
  ParamVec p({1.0, NAN}, indexed_names("psi", 2));
  EXPECT_EQ(p.names[1], "psi2");
  EXPECT_FALSE(p.all_finite());
  p[1] = 0.0;
  EXPECT_TRUE(p.all_finite());
}

TEST(Schedule, PowerLaw) {
  const Schedule s({{1, {0.003, 0.02}, {0.41, 0.31}}});
  const auto a = s.at(1);
  EXPECT_DOUBLE_EQ(a[0], 0.003);
  EXPECT_DOUBLE_EQ(a[1], 0.02);
  const auto b = s.at(100);
  EXPECT_NEAR(b[0], 0.003 * std::pow(100.0, -0.41), 1e-16);
  EXPECT_NEAR(b[1], 0.02 * std::pow(100.0, -0.31), 1e-16);
}

TEST(Schedule, SegmentSwitch) {
  const Schedule s({{1, {1.0}, {0.5}}, {10, {2.0}, {1.0}}, {20, {3.0}, {0.0}}});
  EXPECT_DOUBLE_EQ(s.at(9)[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.at(10)[0], 0.2);
  EXPECT_DOUBLE_EQ(s.at(19)[0], 2.0 / 19.0);
  EXPECT_DOUBLE_EQ(s.at(20)[0], 3.0);
  EXPECT_DOUBLE_EQ(s.at(100000)[0], 3.0);
}

TEST(Schedule, Validation) {
  EXPECT_THROW(Schedule(std::vector<Schedule::Segment>{}), ArgumentError);
  EXPECT_THROW(Schedule({{2, {1.0}, {0.0}}}), ArgumentError);
  EXPECT_THROW(Schedule({{1, {1.0}, {0.0}}, {1, {1.0}, {0.0}}}), ArgumentError);
  EXPECT_THROW(Schedule({{1, {1.0}, {0.0}}, {5, {1.0, 2.0}, {0.0, 0.0}}}), ArgumentError);
  EXPECT_THROW(Schedule({{1, {-0.1}, {0.0}}}), ArgumentError);
  EXPECT_THROW(Schedule({{1, {1.0}, {NAN}}}), ArgumentError);
  EXPECT_THROW(Schedule::constant(1, 1.0).at(0), ArgumentError);
}

TEST(PerturbParams, LiteralDegenerateIsIdentity) {
  RngStream rng(1, 1);
  TestPolicyRule rule{Schedule::constant(3, 1.0), Schedule::constant(3, 1.0), TestPolicyMode::Literal};
  const std::vector<double> psi = {0.7, -1.3, 2.5};
  EXPECT_EQ(draw_test_params(rng, psi, rule, 1), psi);
}

TEST(PerturbParams, LiteralProduct) {
  const std::vector<double> psi = {2.0, -4.0}, u = {0.5, 0.25}, lo = {0.0, 0.0}, hi = {1.0, 1.0};
  const auto out = perturb_params(psi, u, lo, hi, TestPolicyMode::Literal);
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1], -1.0);
}

TEST(PerturbParams, CenteredMidpointCancels) {
  const std::vector<double> psi = {3.0, 3.0}, u = {1.0, 1.0}, lo = {0.0, 0.0}, hi = {2.0, 2.0};
  const auto out = perturb_params(psi, u, lo, hi, TestPolicyMode::Centered);
  EXPECT_DOUBLE_EQ(out[0], 3.0);
  EXPECT_DOUBLE_EQ(out[1], 3.0);
}

TEST(PerturbParams, DrawsStayInsideBounds) {
  TestPolicyRule rule{Schedule::constant(2, 0.0), Schedule::power(2, 2.0, 0.05), TestPolicyMode::Literal};
  const std::vector<double> psi = {1.5, -2.0};
  RngStream rng(4, 2);
  for (int j : {1, 10, 1000}) {
    const double q = 2.0 * std::pow(j, -0.05);
    double s = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const auto d = draw_test_params(rng, psi, rule, j);
      ASSERT_GE(d[0], 0.0);
      ASSERT_LE(d[0], 1.5 * q);
      ASSERT_LE(d[1], 0.0);
      ASSERT_GE(d[1], -2.0 * q);
      s += d[0];
    }
    // mean multiplier is q/2 with sd q/sqrt(12)
    EXPECT_NEAR(s / n, 1.5 * q / 2.0, 4.0 * 1.5 * q / std::sqrt(12.0 * n));
  }
}

TEST(PerturbParams, RejectsBadBounds) {
  RngStream rng(1, 1);
  const std::vector<double> psi = {1.0, 1.0};
  TestPolicyRule wide{Schedule::constant(3, 0.0), Schedule::constant(3, 1.0), TestPolicyMode::Literal};
  EXPECT_THROW(draw_test_params(rng, psi, wide, 1), ArgumentError);
  TestPolicyRule crossed{Schedule::constant(2, 1.0), Schedule::constant(2, 0.5), TestPolicyMode::Literal};
  EXPECT_THROW(draw_test_params(rng, psi, crossed, 1), ArgumentError);
}

TEST(PerturbParams, ModeNames) {
  EXPECT_EQ(test_policy_mode_from_string(to_string(TestPolicyMode::Centered)), TestPolicyMode::Centered);
  EXPECT_EQ(test_policy_mode_from_string("literal"), TestPolicyMode::Literal);
  EXPECT_THROW(test_policy_mode_from_string("uniform"), ArgumentError);
}
