#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "abpower/aggregation.hpp"
#include "abpower/estimators.hpp"
#include "abpower/power.hpp"
#include "abpower/rng.hpp"

namespace abpower::sim {

struct ClusterSizeLaw {
  enum class Kind { kFixed, kPoissonPlusOne };
  Kind kind = Kind::kFixed;
  // k for fixed(k), lambda for poisson(lambda) + 1.
  double param = 1.0;

  double mean() const;
};

struct EventLaw {
  enum class Kind { kNormal, kLognormal };
  Kind kind = Kind::kNormal;
  double mu = 0.0;
  double sigma = 1.0;
};

enum class WeightRole { kCount, kEventValue };

// Target correlations of one covariate with the unit's latent y and w drivers.
struct CovariateSpec {
  double rho_y = 0.0;
  double rho_w = 0.0;
};

// Synthetic clustered population.
//
// Each unit draws two correlated standard normal drivers g_y and g_w
// (correlation `latent_yw_correlation`). The cluster size is fixed, or
// 1 + Poisson(lambda) taken through the normal copula of g_w. Every event's
// y is mu + sigma * l (normal) or exp(mu + sigma * l) (lognormal) with
// l = sqrt(icc) g_y + sqrt(1 - icc) e, then multiplied by
// (n_i / E[n])^size_slope. For event_value weights w = exp(w_sigma * l_w)
// with l_w built from g_w the same way; count weights are 1. Covariates are
// unit-level Gaussians with the requested correlations to (g_y, g_w), so for
// single-event normal clusters with icc = 1 the correlation with y itself is
// rho_y. Treated units get effect * w added to every event's y, which shifts
// the ratio of means by exactly `effect`.
struct GeneratorConfig {
  std::size_t n_units = 200;
  ClusterSizeLaw cluster_size;
  EventLaw y_law;
  WeightRole w_role = WeightRole::kCount;
  std::vector<CovariateSpec> covariates;
  double effect = 0.0;
  std::uint64_t seed = 1;
  double psi = 0.5;
  double icc = 1.0;
  double latent_yw_correlation = 0.5;
  double w_sigma = 0.5;
  double size_slope = 0.0;
};

// Throws ConfigError naming the offending field; infeasible correlation
// targets (non-PSD latent Gram matrix) are rejected here.
void validate(const GeneratorConfig& config);

// Units [0, n_treated) are labelled "T", the rest "C".
std::size_t treated_units(const GeneratorConfig& config);

// Events for one population draw. generate(config) uses stream 0 of the
// config's seed; replications use generate_stream with their own stream.
std::vector<EventRecord> generate(const GeneratorConfig& config);
std::vector<EventRecord> generate_stream(const GeneratorConfig& config,
                                         std::uint64_t stream);

// E[W_i] of the generator, by quadrature over the copula driver.
double expected_denominator(const GeneratorConfig& config);

// Shift of `kind`'s estimand caused by config.effect.
double true_effect(const GeneratorConfig& config, MetricKind kind);

// Population residual_sd / denom_mean for `kind`, from one large null draw
// (`pilot_units` units, treated as a single arm).
VarianceProfile pilot_profile(const GeneratorConfig& config, MetricKind kind,
                              std::size_t pilot_units = 200000);

struct HarnessOptions {
  double alpha = 0.05;
  NormalTail tail = NormalTail::kOneSided;
  // Nominal two-sided coverage of the reported intervals.
  double coverage_level = 0.95;
  // Replications run on this many threads; 0 means hardware concurrency.
  unsigned threads = 0;
};

struct CalibrationReport {
  std::string estimator;
  std::size_t replications = 0;
  std::size_t failures = 0;
  double true_effect = 0.0;
  double mean_estimate = 0.0;
  double mean_estimated_se = 0.0;
  double empirical_sd = 0.0;
  // mean_estimated_se / empirical_sd; 1 when both vanish.
  double calibration_ratio = 1.0;
  double coverage = 0.0;
  // Share of replications rejecting at alpha; the size of the test when the
  // effect is zero.
  double rejection_rate_null = 0.0;
  std::optional<double> empirical_power;
  std::optional<double> predicted_power;
};

// Runs generate -> aggregate -> per-arm estimate -> effect `replications`
// times and compares the SE of the effect with the spread of the estimates.
// Replication r draws from stream r + 1, so two calls with one config see
// identical data whatever the estimator. More than 1% failed replications
// throws HarnessError.
CalibrationReport calibrate_se(const GeneratorConfig& config, MetricKind kind,
                               std::size_t replications,
                               const HarnessOptions& options = {});

// Empirical rejection rate at spec.alpha / spec.tail next to solve_power's
// prediction from the pilot profile. Sample size and psi come from `config`.
CalibrationReport empirical_power(const GeneratorConfig& config,
                                  const PowerSpec& spec, MetricKind kind,
                                  std::size_t replications,
                                  const HarnessOptions& options = {});

// Generator effect that makes solve_power predict `power` for `kind`.
double effect_for_power(const GeneratorConfig& config, MetricKind kind,
                        double alpha, double power, NormalTail tail);

// Fixed-weight SE of a weighted average of V_i = y_i / w_i:
// sqrt(sum w^2 / (sum w)^2 * s_V^2) with s_V^2 the sample variance of V.
double naive_weighted_se(std::span<const ClusterRow> rows);

struct PitfallReport {
  std::size_t replications = 0;
  std::size_t failures = 0;
  double empirical_sd = 0.0;
  double mean_delta_se = 0.0;
  double mean_naive_se = 0.0;
  double delta_calibration_ratio = 0.0;
  double naive_calibration_ratio = 0.0;
  // "underestimates", "overestimates" or "calibrated".
  std::string naive_direction;
  // |naive - 1| > |delta - 1|
  bool naive_worse = false;
};

// Ratio-of-means effect with two SEs per replication: the delta-method SE and
// the fixed-weight weighted-average SE combined across arms.
PitfallReport pitfall_weighted_regression(const GeneratorConfig& config,
                                          std::size_t replications,
                                          const HarnessOptions& options = {});

}  // namespace abpower::sim
