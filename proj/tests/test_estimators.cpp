#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>

#include "abpower/errors.hpp"
#include "abpower/estimators.hpp"

using namespace abpower;

namespace {

std::vector<ClusterRow> random_rows(std::size_t n, std::size_t p,
                                    std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::poisson_distribution<int> k(2.0);
  std::vector<ClusterRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i].unit_id = std::to_string(i);
    rows[i].w = 1.0 + k(gen);
    for (std::size_t j = 0; j < p; ++j) rows[i].x.push_back(z(gen) + rows[i].w);
    rows[i].y = rows[i].w * (3.0 + 0.5 * z(gen)) +
                (p ? 0.7 * rows[i].x[0] : 0.0);
    rows[i].n_events = static_cast<std::size_t>(rows[i].w);
  }
  return rows;
}

// Variance of ybar/wbar by expanding the delta-method quadratic form
// (s_yy - 2 theta s_yw + theta^2 s_ww) / (n wbar^2).
double delta_se_by_covariances(const std::vector<ClusterRow>& rows) {
  const double n = static_cast<double>(rows.size());
  double ybar = 0, wbar = 0;
  for (const auto& r : rows) {
    ybar += r.y / n;
    wbar += r.w / n;
  }
  double syy = 0, sww = 0, syw = 0;
  for (const auto& r : rows) {
    syy += (r.y - ybar) * (r.y - ybar) / (n - 1);
    sww += (r.w - wbar) * (r.w - wbar) / (n - 1);
    syw += (r.y - ybar) * (r.w - wbar) / (n - 1);
  }
  const double t = ybar / wbar;
  return std::sqrt((syy - 2 * t * syw + t * t * sww) / (n * wbar * wbar));
}

struct AdjustedOracle {
  double estimate, se;
};

// Regression adjustment through Eigen's normal-equation-free solver.
AdjustedOracle adjusted_ratio_oracle(const std::vector<ClusterRow>& rows,
                                     const std::vector<double>& xbar) {
  const std::size_t n = rows.size(), p = xbar.size();
  Eigen::MatrixXd a(n, p + 1);
  Eigen::VectorXd y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    for (std::size_t j = 0; j < p; ++j) a(i, j + 1) = rows[i].x[j];
    y(i) = rows[i].y;
    w(i) = rows[i].w;
  }
  const auto qr = a.colPivHouseholderQr();
  const Eigen::VectorXd by = qr.solve(y), bw = qr.solve(w);
  Eigen::VectorXd at(p + 1);
  at(0) = 1.0;
  for (std::size_t j = 0; j < p; ++j) at(j + 1) = xbar[j];
  const double my = at.dot(by), mw = at.dot(bw);
  const double theta = my / mw;
  const Eigen::VectorXd r = (y - a * by) - theta * (w - a * bw);
  const double sr = std::sqrt(r.squaredNorm() / static_cast<double>(n - p - 1));
  return {theta, sr / (std::sqrt(static_cast<double>(n)) * mw)};
}

}  // namespace

TEST(Mean, KnownValues) {
  std::vector<ClusterRow> rows(4);
  const double ys[] = {1, 2, 3, 6};
  for (int i = 0; i < 4; ++i) rows[i].y = ys[i];
  const ArmEstimate e = estimate_arm_mean(rows);
  EXPECT_DOUBLE_EQ(e.estimate, 3.0);
  EXPECT_NEAR(e.se, std::sqrt(14.0 / 3.0 / 4.0), 1e-15);
  EXPECT_EQ(e.df, 3u);
}

TEST(Ratio, MatchesCovarianceExpansion) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto rows = random_rows(300, 0, seed);
    const ArmEstimate e = estimate_arm_ratio(rows);
    EXPECT_NEAR(e.se, delta_se_by_covariances(rows), 1e-12 * e.se);
  }
}

TEST(Ratio, ScaleEquivariance) {
  auto rows = random_rows(100, 0, 9);
  const ArmEstimate base = estimate_arm_ratio(rows);
  for (auto& r : rows) r.y *= 7.0;
  const ArmEstimate ys = estimate_arm_ratio(rows);
  EXPECT_NEAR(ys.estimate, 7.0 * base.estimate, 1e-12 * ys.estimate);
  EXPECT_NEAR(ys.se, 7.0 * base.se, 1e-12 * ys.se);
  for (auto& r : rows) r.w *= 4.0;
  const ArmEstimate ws = estimate_arm_ratio(rows);
  EXPECT_NEAR(ws.estimate, 7.0 / 4.0 * base.estimate, 1e-12 * ws.estimate);
  EXPECT_NEAR(ws.se, 7.0 / 4.0 * base.se, 1e-12 * ws.se);
}

TEST(Ratio, RowOrderInvariance) {
  auto rows = random_rows(100, 2, 10);
  const auto xbar = covariate_mean(rows);
  const ArmEstimate a = estimate_arm_adjusted_ratio(rows, xbar, ThetaMode::kArmAdjusted);
  std::reverse(rows.begin(), rows.end());
  const ArmEstimate b = estimate_arm_adjusted_ratio(rows, xbar, ThetaMode::kArmAdjusted);
  EXPECT_NEAR(a.estimate, b.estimate, 1e-13 * a.estimate);
  EXPECT_NEAR(a.se, b.se, 1e-12 * a.se);
}

TEST(Ratio, DegenerateDenominator) {
  std::vector<ClusterRow> rows(3);
  EXPECT_THROW(estimate_arm_ratio(rows), DegenerateDenominatorError);
}

TEST(AdjustedRatio, MatchesIndependentOracle) {
  const auto rows = random_rows(250, 3, 21);
  std::vector<double> xbar = covariate_mean(rows);
  xbar[0] += 0.3;
  const auto got = estimate_arm_adjusted_ratio(rows, xbar, ThetaMode::kArmAdjusted);
  const auto want = adjusted_ratio_oracle(rows, xbar);
  EXPECT_NEAR(got.estimate, want.estimate, 1e-11 * want.estimate);
  EXPECT_NEAR(got.se, want.se, 1e-10 * want.se);
  EXPECT_EQ(got.df, 250u - 4u);
}

TEST(AdjustedRatio, UnadjustedThetaUsesRawRatio) {
  const auto rows = random_rows(80, 1, 22);
  const auto xbar = covariate_mean(rows);
  // At the arm's own covariate mean both thetas coincide.
  const auto a = estimate_arm_adjusted_ratio(rows, xbar, ThetaMode::kArmAdjusted);
  const auto b = estimate_arm_adjusted_ratio(rows, xbar, ThetaMode::kUnadjusted);
  EXPECT_NEAR(a.se, b.se, 1e-12 * a.se);
}

TEST(AdjustedMean, OwnMeanGivesRawMean) {
  const auto rows = random_rows(60, 2, 23);
  const auto adj = estimate_arm_adjusted_mean(rows, covariate_mean(rows));
  EXPECT_NEAR(adj.estimate, estimate_arm_mean(rows).estimate, 1e-12 * adj.estimate);
  EXPECT_LE(adj.residual_sd, estimate_arm_mean(rows).residual_sd);
}

TEST(Adjusted, NeedsMoreRowsThanParameters) {
  const auto rows = random_rows(3, 2, 24);
  EXPECT_THROW(estimate_arm_adjusted_mean(rows, covariate_mean(rows)),
               InsufficientDataError);
}

TEST(Effect, OneAndTwoSided) {
  ArmEstimate c, t;
  c.estimate = 1.0;
  c.se = 0.3;
  t.estimate = 1.5;
  t.se = 0.4;
  const auto one = estimate_effect(c, t, 0.05, NormalTail::kOneSided);
  EXPECT_DOUBLE_EQ(one.delta, 0.5);
  EXPECT_DOUBLE_EQ(one.se, 0.5);
  EXPECT_DOUBLE_EQ(one.z, 1.0);
  EXPECT_NEAR(one.p_value, 0.15865525393145707, 1e-15);
  EXPECT_NEAR(one.ci_low, 0.5 - 1.6448536269514722 * 0.5, 1e-12);
  EXPECT_TRUE(std::isinf(one.ci_high));
  const auto two = estimate_effect(c, t, 0.05, NormalTail::kTwoSided);
  EXPECT_NEAR(two.p_value, 0.31731050786291415, 1e-15);
  EXPECT_NEAR(two.ci_high, 0.5 + 1.959963984540054 * 0.5, 1e-12);
}

TEST(Effect, IncompatibleKinds) {
  ArmEstimate c, t;
  t.metric_kind = MetricKind::kRatio;
  EXPECT_THROW(estimate_effect(c, t, 0.05, NormalTail::kOneSided),
               IncompatibleArmsError);
}

TEST(Analyze, ResidualsMatchReportedSd) {
  const auto rows = random_rows(120, 2, 25);
  const auto xbar = covariate_mean(rows);
  for (MetricKind k : {MetricKind::kMean, MetricKind::kRatio,
                       MetricKind::kAdjustedMean, MetricKind::kAdjustedRatio}) {
    const ArmAnalysis a = analyze_arm(rows, k, xbar, ThetaMode::kArmAdjusted);
    double ss = 0;
    for (double r : a.residuals) ss += r * r;
    EXPECT_NEAR(std::sqrt(ss / a.estimate.df), a.estimate.residual_sd,
                1e-12 * a.estimate.residual_sd)
        << to_string(k);
  }
}
