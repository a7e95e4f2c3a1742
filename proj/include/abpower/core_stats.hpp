#pragma once

#include <span>
#include <string_view>

namespace abpower {

enum class NormalTail { kOneSided, kTwoSided };

std::string_view to_string(NormalTail tail);
NormalTail parse_tail(std::string_view text);

// Quantile argument for significance level `alpha`: 1 - alpha for one-sided
// tests, 1 - alpha/2 for two-sided.
double tail_probability(double alpha, NormalTail tail);

// Standard normal CDF. Throws DomainError for non-finite z.
double normal_cdf(double z);

// Upper tail 1 - Phi(z), accurate for large z.
double normal_survival(double z);

// Inverse of normal_cdf. Acklam's rational approximation followed by one
// Halley step against erfc; absolute error below 1e-9 on [1e-12, 1 - 1e-12].
// Throws DomainError unless 0 < p < 1.
double normal_quantile(double p);

struct MeanVar {
  double mean = 0.0;
  double variance = 0.0;
};

// Two-pass mean and variance with denominator n - df_loss.
// Throws InsufficientDataError when xs.size() <= df_loss.
MeanVar sample_mean_var(std::span<const double> xs, std::size_t df_loss);

// Sum of squares divided by n - df_loss, without centering. This is the
// residual variance used by every estimator: the residuals it is applied to
// already sum to zero by construction.
double residual_variance(std::span<const double> residuals,
                         std::size_t df_loss);

// Population (biased) skewness m3 / m2^{3/2}. Needs at least three values and
// nonzero variance; throws InsufficientDataError / UndefinedSkewnessError.
double sample_skewness(std::span<const double> xs);

}  // namespace abpower
