#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "abpower/errors.hpp"
#include "abpower/simulation.hpp"

using namespace abpower;

namespace {

sim::GeneratorConfig small() {
  sim::GeneratorConfig g;
  g.n_units = 150;
  g.cluster_size = {sim::ClusterSizeLaw::Kind::kPoissonPlusOne, 2.0};
  g.y_law = {sim::EventLaw::Kind::kLognormal, 0.0, 0.5};
  g.icc = 0.5;
  g.seed = 99;
  return g;
}

double corr(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Rng, CounterBasedAndSplittable) {
  CounterRng a(1, 2), b(1, 2), c(1, 3);
  for (int i = 0; i < 10; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
  }
  CounterRng d(5, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = d.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  EXPECT_NE(d.split(1)(), d.split(2)());
}

TEST(Generate, DeterministicPerSeedAndStream) {
  const auto g = small();
  const auto a = sim::generate(g);
  const auto b = sim::generate(g);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].y, b[i].y);
  const auto c = sim::generate_stream(g, 1);
  EXPECT_NE(a.front().y, c.front().y);
}

TEST(Generate, ArmsAndUnits) {
  auto g = small();
  g.psi = 0.3;
  const auto events = sim::generate(g);
  std::set<std::string> treated, all;
  for (const auto& e : events) {
    all.insert(e.unit_id);
    if (e.arm == "T") treated.insert(e.unit_id);
  }
  EXPECT_EQ(all.size(), g.n_units);
  EXPECT_EQ(treated.size(), sim::treated_units(g));
  EXPECT_EQ(sim::treated_units(g), 45u);
}

TEST(Generate, CovariateCorrelationTarget) {
  sim::GeneratorConfig g;
  g.n_units = 100000;
  g.y_law = {sim::EventLaw::Kind::kNormal, 0.0, 1.0};
  g.covariates = {{0.7, 0.2}};
  const auto events = sim::generate(g);
  std::vector<double> y, x;
  for (const auto& e : events) {
    y.push_back(e.y);
    x.push_back(e.covariates[0]);
  }
  EXPECT_NEAR(corr(x, y), 0.7, 0.01);
}

TEST(Generate, ExpectedDenominatorMatchesDraw) {
  auto g = small();
  g.n_units = 200000;
  g.w_role = sim::WeightRole::kEventValue;
  const auto rows = aggregate(sim::generate(g), WeightMode::kSum, CovariateMode::kSum);
  double mean = 0.0;
  for (const auto& r : rows) mean += r.w / static_cast<double>(rows.size());
  EXPECT_NEAR(mean / sim::expected_denominator(g), 1.0, 0.01);
}

TEST(Validate, RejectsBadConfigs) {
  auto g = small();
  g.covariates = {{1.5, 0.0}};
  EXPECT_THROW(sim::validate(g), ConfigError);
  g.covariates = {{0.9, -0.9}};
  g.latent_yw_correlation = 0.9;
  EXPECT_THROW(sim::validate(g), ConfigError);
  g = small();
  g.psi = 1.0;
  EXPECT_THROW(sim::validate(g), ConfigError);
  g = small();
  g.n_units = 3;
  EXPECT_THROW(sim::validate(g), ConfigError);
}

TEST(Harness, ReproducibleAcrossThreadCounts) {
  const auto g = small();
  sim::HarnessOptions one;
  one.threads = 1;
  sim::HarnessOptions four;
  four.threads = 4;
  const auto a = sim::calibrate_se(g, MetricKind::kRatio, 300, one);
  const auto b = sim::calibrate_se(g, MetricKind::kRatio, 300, four);
  EXPECT_EQ(a.mean_estimate, b.mean_estimate);
  EXPECT_EQ(a.empirical_sd, b.empirical_sd);
  EXPECT_EQ(a.coverage, b.coverage);
}

TEST(Harness, TrueEffectRecovered) {
  auto g = small();
  g.effect = 0.4;
  const auto r = sim::calibrate_se(g, MetricKind::kRatio, 500);
  EXPECT_DOUBLE_EQ(r.true_effect, 0.4);
  EXPECT_NEAR(r.mean_estimate, 0.4, 4 * r.empirical_sd / std::sqrt(500.0));
}

TEST(Harness, NaiveWeightedSeFormula) {
  std::vector<ClusterRow> rows(3);
  const double ys[] = {2, 6, 3}, ws[] = {1, 2, 3};
  for (int i = 0; i < 3; ++i) {
    rows[i].y = ys[i];
    rows[i].w = ws[i];
  }
  // V = {2, 3, 1}: s_V^2 = 1; sum w^2 / (sum w)^2 = 14 / 36.
  EXPECT_NEAR(sim::naive_weighted_se(rows), std::sqrt(14.0 / 36.0), 1e-15);
}
