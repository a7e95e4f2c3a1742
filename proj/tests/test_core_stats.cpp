#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "abpower/core_stats.hpp"
#include "abpower/errors.hpp"

using namespace abpower;

// Reference quantiles from a 50-digit mpmath evaluation of sqrt(2) erfinv.
TEST(NormalQuantile, MatchesHighPrecisionReference) {
  EXPECT_NEAR(normal_quantile(0.95), 1.6448536269514722, 1e-12);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_quantile(0.8), 0.8416212335729143, 1e-12);
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-15);
  EXPECT_NEAR(normal_quantile(1e-10), -6.361340902404056, 1e-9);
}

TEST(NormalQuantile, InvertsCdfAcrossRange) {
  for (double p = 1e-12; p < 1.0; p = p < 0.01 ? p * 10 : p + 0.01) {
    EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-9 * std::max(p, 1e-3))
        << p;
  }
}

TEST(NormalQuantile, SymmetricAndMonotone) {
  double prev = -INFINITY;
  for (int i = 1; i < 1000; ++i) {
    const double p = i / 1000.0;
    const double q = normal_quantile(p);
    EXPECT_GT(q, prev);
    EXPECT_NEAR(q, -normal_quantile(1.0 - p), 1e-12);
    prev = q;
  }
}

TEST(NormalQuantile, RejectsOutOfRange) {
  EXPECT_THROW(normal_quantile(0.0), DomainError);
  EXPECT_THROW(normal_quantile(1.0), DomainError);
  EXPECT_THROW(normal_quantile(NAN), DomainError);
}

TEST(NormalCdf, TailsAndSurvival) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_survival(10.0), 7.619853024160527e-24, 1e-36);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-15);
  EXPECT_THROW(normal_cdf(INFINITY), DomainError);
}

TEST(TailProbability, OneAndTwoSided) {
  EXPECT_DOUBLE_EQ(tail_probability(0.05, NormalTail::kOneSided), 0.95);
  EXPECT_DOUBLE_EQ(tail_probability(0.05, NormalTail::kTwoSided), 0.975);
  EXPECT_EQ(parse_tail("two"), NormalTail::kTwoSided);
  EXPECT_THROW(parse_tail("both"), ConfigError);
}

TEST(SampleMeanVar, KnownValues) {
  const std::vector<double> xs = {2, 4, 4, 4, 5, 5, 7, 9};
  const MeanVar mv = sample_mean_var(xs, 1);
  EXPECT_DOUBLE_EQ(mv.mean, 5.0);
  EXPECT_DOUBLE_EQ(mv.variance, 32.0 / 7.0);
  EXPECT_THROW(sample_mean_var(std::vector<double>{1.0}, 1),
               InsufficientDataError);
}

TEST(SampleMeanVar, StableUnderLargeOffset) {
  std::vector<double> xs;
  for (int i = 0; i < 100; ++i) xs.push_back(1e9 + (i % 2 ? 1.0 : -1.0));
  EXPECT_NEAR(sample_mean_var(xs, 1).variance, 100.0 / 99.0, 1e-9);
}

TEST(ResidualVariance, Uncentered) {
  const std::vector<double> r = {1.0, -2.0, 1.0};
  EXPECT_DOUBLE_EQ(residual_variance(r, 1), 3.0);
}

TEST(Skewness, PopulationForm) {
  const std::vector<double> xs = {0, 0, 0, 1};
  // m2 = 3/16, m3 = 3/32 => 0.09375 / 0.0811898816...
  EXPECT_NEAR(sample_skewness(xs), 1.1547005383792515, 1e-14);
  EXPECT_THROW(sample_skewness(std::vector<double>{3, 3, 3}),
               UndefinedSkewnessError);
  EXPECT_THROW(sample_skewness(std::vector<double>{1, 2}),
               InsufficientDataError);
}
