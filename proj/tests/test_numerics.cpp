#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "mfq/numerics.hpp"

using namespace mfq;

namespace {

constexpr double kEulerGamma = 0.57721566490153286;

double gamma_cdf_series(double shape, double rate, double z) {
  // regularized lower incomplete gamma by its power series
  const double x = rate * z;
  double term = 1.0 / shape, sum = term;
  for (int n = 1; n < 500; ++n) {
    term *= x / (shape + n);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return std::exp(shape * std::log(x) - x - std::lgamma(shape)) * sum;
}

}  // namespace

TEST(LnGamma, KnownValues) {
  EXPECT_NEAR(ln_gamma(1.0), 0.0, 1e-14);
  EXPECT_NEAR(ln_gamma(2.0), 0.0, 1e-14);
  EXPECT_NEAR(ln_gamma(4.0), std::log(1.0 * 2.0 * 3.0), 1e-12);
  EXPECT_NEAR(ln_gamma(0.5), 0.5 * std::log(std::numbers::pi), 1e-12);
}

TEST(LnGamma, MatchesStdLgammaOverRange) {
  RngStream rng(3, 1);
  for (int i = 0; i < 2000; ++i) {
    const double x = std::exp(sample_uniform(rng, std::log(1e-3), std::log(1e6)));
    EXPECT_NEAR(ln_gamma(x), std::lgamma(x), 1e-12 * std::max(1.0, std::abs(std::lgamma(x)))) << x;
  }
}

TEST(LnGamma, Recurrence) {
  RngStream rng(3, 2);
  for (int i = 0; i < 1000; ++i) {
    const double x = sample_uniform(rng, 1e-6, 100.0);
    EXPECT_NEAR(ln_gamma(x + 1.0), ln_gamma(x) + std::log(x), 1e-11) << x;
  }
}

TEST(LnGamma, RejectsBadArguments) {
  EXPECT_THROW(ln_gamma(0.0), DomainError);
  EXPECT_THROW(ln_gamma(-1.5), DomainError);
  EXPECT_THROW(ln_gamma(std::nan("")), DomainError);
  EXPECT_THROW(ln_gamma(INFINITY), DomainError);
}

TEST(Digamma, KnownValues) {
  EXPECT_NEAR(digamma(1.0), -kEulerGamma, 1e-10);
  EXPECT_NEAR(digamma(2.0), digamma(1.0) + 1.0, 1e-10);
  EXPECT_NEAR(digamma(2.0), 1.0 - kEulerGamma, 1e-10);
  EXPECT_NEAR(digamma(0.5), -kEulerGamma - 2.0 * std::log(2.0), 1e-10);
}

TEST(Digamma, MatchesFiniteDifferenceOfLnGamma) {
  RngStream rng(4, 1);
  for (int i = 0; i < 500; ++i) {
    const double x = sample_uniform(rng, 0.05, 50.0);
    const double h = 1e-5 * std::max(1.0, x);
    const double fd = (std::lgamma(x + h) - std::lgamma(x - h)) / (2.0 * h);
    EXPECT_NEAR(digamma(x), fd, 1e-6) << x;
  }
}

TEST(Digamma, RejectsNonPositive) {
  EXPECT_THROW(digamma(0.0), DomainError);
  EXPECT_THROW(digamma(-2.0), DomainError);
}

TEST(Integrate, TrivialAndAnalytic) {
  EXPECT_NEAR(integrate([](double) { return 1.0; }, 0.0, 1.0), 1.0, 1e-15);
  EXPECT_NEAR(integrate([](double s) { return s; }, 0.0, 2.0), 2.0, 1e-14);
  EXPECT_NEAR(integrate([](double s) { return std::exp(s); }, 0.0, 1.0), std::numbers::e - 1.0, 1e-14);
  EXPECT_EQ(integrate([](double s) { return s; }, 3.0, 3.0), 0.0);
}

TEST(Integrate, ExactOnPolynomials) {
  // 8-node rule is exact through degree 15
  for (int deg = 0; deg <= 15; ++deg) {
    const double got = integrate([deg](double s) { return std::pow(s, deg); }, 0.0, 1.0, 8);
    EXPECT_NEAR(got, 1.0 / (deg + 1), 1e-14) << deg;
  }
}

TEST(Integrate, SmoothIntegrandsAtDefaultNodes) {
  const double got = integrate([](double s) { return std::lgamma(std::exp(1.5 * (s - 1.0) + 1.2)); }, 0.0, 1.0);
  const double ref = integrate_panels([](double s) { return std::lgamma(std::exp(1.5 * (s - 1.0) + 1.2)); }, 0.0, 1.0,
                                      64, 32);
  EXPECT_NEAR(got, ref, 1e-9 * std::abs(ref));
}

TEST(Integrate, RejectsBadArguments) {
  EXPECT_THROW(integrate([](double) { return 1.0; }, 0.0, 1.0, 1), ArgumentError);
  EXPECT_THROW(integrate([](double) { return 1.0; }, 1.0, 0.0), ArgumentError);
}

TEST(RngStream, Deterministic) {
  RngStream a(11, stream_id({1, 2, 3})), b(11, stream_id({1, 2, 3}));
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, DistinctStreamsDiffer) {
  RngStream a(11, stream_id({1, 2, 3})), b(11, stream_id({1, 2, 4})), c(12, stream_id({1, 2, 3}));
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    same_ab += x == b.next_u64();
    same_ac += x == c.next_u64();
  }
  EXPECT_EQ(same_ab, 0);
  EXPECT_EQ(same_ac, 0);
}

TEST(RngStream, StreamsAreUncorrelated) {
  RngStream a(5, stream_id({7})), b(5, stream_id({8}));
  const int n = 200000;
  double sab = 0.0;
  for (int i = 0; i < n; ++i) sab += a.standard_normal() * b.standard_normal();
  EXPECT_LT(std::abs(sab / n), 4.0 / std::sqrt(n));
}

TEST(RngStream, UniformInOpenInterval) {
  RngStream r(1, 1);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Samplers, PoissonZeroIntensity) {
  RngStream r(1, 2);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_poisson(r, 0.0), 0);
}

TEST(Samplers, GammaMean) {
  RngStream r(2, 3);
  const int n = 1000000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = sample_gamma(r, 4.0, 2.0);
    s += z;
    s2 += z * z;
  }
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, 4.0 / 2.0, 3.0 * se);
}

TEST(Samplers, NormalVariance) {
  RngStream r(2, 4);
  const int n = 1000000;
  std::vector<double> d(n);
  double s = 0.0;
  for (auto& x : d) s += (x = sample_normal(r, 0.125, 0.5));
  const double mean = s / n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : d) {
    const double c = (x - mean) * (x - mean);
    m2 += c;
    m4 += c * c;
  }
  m2 /= n;
  m4 /= n;
  const double se = std::sqrt((m4 - m2 * m2) / n);
  EXPECT_NEAR(m2, 0.25, 3.0 * se);
}

TEST(Samplers, PoissonMeanBothBranches) {
  RngStream r(2, 5);
  for (double lam : {0.003, 1.5, 25.0}) {
    const int n = 400000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += static_cast<double>(sample_poisson(r, lam));
    EXPECT_NEAR(s / n, lam, 4.0 * std::sqrt(lam / n)) << lam;
  }
}

TEST(Samplers, GammaKolmogorovSmirnov) {
  for (double shape : {0.3, 0.89, 4.0}) {
    RngStream r(9, stream_id({static_cast<std::uint64_t>(shape * 100)}));
    const int n = 100000;
    std::vector<double> z(n);
    for (auto& v : z) v = sample_gamma(r, shape, 2.0);
    std::sort(z.begin(), z.end());
    double d = 0.0;
    for (int i = 0; i < n; ++i) {
      const double F = gamma_cdf_series(shape, 2.0, z[i]);
      d = std::max({d, std::abs(F - static_cast<double>(i) / n), std::abs(F - static_cast<double>(i + 1) / n)});
    }
    EXPECT_LT(d, 1.628 / std::sqrt(static_cast<double>(n))) << shape;  // 1% critical value
  }
}

TEST(Samplers, RejectInvalidParameters) {
  RngStream r(1, 1);
  EXPECT_THROW(sample_normal(r, 0.0, 0.0), DomainError);
  EXPECT_THROW(sample_normal(r, NAN, 1.0), DomainError);
  EXPECT_THROW(sample_gamma(r, 0.0, 1.0), DomainError);
  EXPECT_THROW(sample_gamma(r, 1.0, -1.0), DomainError);
  EXPECT_THROW(sample_poisson(r, -0.1), DomainError);
}
