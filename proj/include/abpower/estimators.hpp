#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "abpower/aggregation.hpp"
#include "abpower/core_stats.hpp"
#include "abpower/ols.hpp"

namespace abpower {

enum class MetricKind { kMean, kRatio, kAdjustedMean, kAdjustedRatio };

std::string_view to_string(MetricKind kind);
MetricKind parse_metric_kind(std::string_view text);
bool is_ratio(MetricKind kind);
bool is_adjusted(MetricKind kind);

// Which ratio goes into the double residual y - yhat - theta (w - what).
enum class ThetaMode {
  kArmAdjusted,  // muhat_Y / muhat_W of the arm (post-experiment analysis)
  kUnadjusted,   // ybar / wbar (planning from historical data)
};

struct ArmEstimate {
  MetricKind metric_kind = MetricKind::kMean;
  double estimate = 0.0;
  double denom_mean = 1.0;
  double residual_sd = 0.0;
  std::size_t n_units = 0;
  std::size_t df = 0;
  // residual_sd / (sqrt(n_units) * denom_mean)
  double se = 0.0;
};

// An estimate together with the per-unit residuals whose sample standard
// deviation produced it. Diagnostics (skewness, residual R^2) read these.
struct ArmAnalysis {
  ArmEstimate estimate;
  std::vector<double> residuals;
};

struct EffectEstimate {
  double delta = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 0.0;
  NormalTail tail = NormalTail::kOneSided;
  double alpha = 0.05;
  double ci_low = 0.0;
  // +infinity for one-sided intervals.
  double ci_high = 0.0;
};

// Column means of the covariates across `rows`.
std::vector<double> covariate_mean(std::span<const ClusterRow> rows);

// Covariate matrix of `rows` (n x p).
Matrix design_of(std::span<const ClusterRow> rows);

ArmEstimate estimate_arm_mean(std::span<const ClusterRow> rows);

// Delta-method ratio of means ybar / wbar with residuals y - theta w.
// Throws DegenerateDenominatorError unless wbar > 0.
ArmEstimate estimate_arm_ratio(std::span<const ClusterRow> rows);

// Regression-adjusted mean: the arm's OLS fit predicted at `xbar`, with
// SE s_r / sqrt(n) from the fit's residuals on n - p - 1 degrees of freedom.
// The extra variance from predicting away from the arm's own covariate mean
// is not included.
ArmEstimate estimate_arm_adjusted_mean(std::span<const ClusterRow> rows,
                                       std::span<const double> xbar);

// Regression-adjusted ratio muhat_Y / muhat_W. Both y and w are regressed on
// the same covariates and predicted at `xbar`; the SE comes from the double
// residuals (y - yhat) - theta (w - what) on n - p - 1 degrees of freedom,
// divided by sqrt(n) * muhat_W.
ArmEstimate estimate_arm_adjusted_ratio(std::span<const ClusterRow> rows,
                                        std::span<const double> xbar,
                                        ThetaMode theta_mode);

// Dispatcher over the four kinds that also returns the residuals. `xbar` is
// ignored for unadjusted kinds.
ArmAnalysis analyze_arm(std::span<const ClusterRow> rows, MetricKind kind,
                        std::span<const double> xbar, ThetaMode theta_mode);

// Treatment minus control with the unpooled SE sqrt(se_c^2 + se_t^2).
// One-sided tests look for an increase: p = 1 - Phi(z) and the interval is
// [delta - z_{1-alpha} se, +inf). Throws IncompatibleArmsError when the arms
// were estimated with different metric kinds.
EffectEstimate estimate_effect(const ArmEstimate& control,
                               const ArmEstimate& treatment, double alpha,
                               NormalTail tail);

}  // namespace abpower
