#include "abpower/core_stats.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "abpower/errors.hpp"

namespace abpower {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kSqrt2Pi = 2.50662827463100050242;

// Acklam's rational approximation coefficients.
constexpr std::array<double, 6> kCentralNum = {
    -3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
    1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
constexpr std::array<double, 5> kCentralDen = {
    -5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
    6.680131188771972e+01, -1.328068155288572e+01};
constexpr std::array<double, 6> kTailNum = {
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
    -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
constexpr std::array<double, 4> kTailDen = {
    7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
    3.754408661907416e+00};
constexpr double kLowBreak = 0.02425;

// Lower-tail approximation for q <= 0.5, in terms of the tail mass q.
double acklam_lower(double q) {
  if (q < kLowBreak) {
    const double t = std::sqrt(-2.0 * std::log(q));
    return (((((kTailNum[0] * t + kTailNum[1]) * t + kTailNum[2]) * t +
              kTailNum[3]) * t + kTailNum[4]) * t + kTailNum[5]) /
           ((((kTailDen[0] * t + kTailDen[1]) * t + kTailDen[2]) * t +
             kTailDen[3]) * t + 1.0);
  }
  const double u = q - 0.5;
  const double r = u * u;
  return (((((kCentralNum[0] * r + kCentralNum[1]) * r + kCentralNum[2]) * r +
            kCentralNum[3]) * r + kCentralNum[4]) * r + kCentralNum[5]) * u /
         (((((kCentralDen[0] * r + kCentralDen[1]) * r + kCentralDen[2]) * r +
            kCentralDen[3]) * r + kCentralDen[4]) * r + 1.0);
}

}  // namespace

std::string_view to_string(NormalTail tail) {
  return tail == NormalTail::kOneSided ? "one" : "two";
}

NormalTail parse_tail(std::string_view text) {
  if (text == "one") return NormalTail::kOneSided;
  if (text == "two") return NormalTail::kTwoSided;
  throw DomainError("tail must be 'one' or 'two', got '" + std::string(text) +
                    "'");
}

double tail_probability(double alpha, NormalTail tail) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("alpha must lie in (0,1), got " + std::to_string(alpha));
  }
  return tail == NormalTail::kOneSided ? 1.0 - alpha : 1.0 - alpha / 2.0;
}

double normal_cdf(double z) {
  if (!std::isfinite(z)) throw DomainError("normal_cdf: z must be finite");
  return 0.5 * std::erfc(-z * kInvSqrt2);
}

double normal_survival(double z) {
  if (!std::isfinite(z)) throw DomainError("normal_survival: z must be finite");
  return 0.5 * std::erfc(z * kInvSqrt2);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("normal_quantile: p must lie in (0,1), got " +
                      std::to_string(p));
  }
  // Work on the smaller tail; 1 - p is exact for p >= 0.5.
  const bool upper = p > 0.5;
  const double q = upper ? 1.0 - p : p;
  double x = acklam_lower(q);

  // One Halley step on F(x) = Phi(x) - q, evaluated in the lower tail.
  const double e = 0.5 * std::erfc(-x * kInvSqrt2) - q;
  const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);

  return upper ? -x : x;
}

MeanVar sample_mean_var(std::span<const double> xs, std::size_t df_loss) {
  if (xs.size() <= df_loss) {
    throw InsufficientDataError("need more than " + std::to_string(df_loss) +
                                " values, got " + std::to_string(xs.size()));
  }
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  double drift = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    ss += d * d;
    drift += d;
  }
  // Corrected two-pass: removes the rounding error left in the mean.
  const double n = static_cast<double>(xs.size());
  ss -= drift * drift / n;
  if (ss < 0.0) ss = 0.0;
  return {mean, ss / static_cast<double>(xs.size() - df_loss)};
}

double residual_variance(std::span<const double> residuals,
                         std::size_t df_loss) {
  if (residuals.size() <= df_loss) {
    throw InsufficientDataError("need more than " + std::to_string(df_loss) +
                                " residuals, got " +
                                std::to_string(residuals.size()));
  }
  double ss = 0.0;
  for (double r : residuals) ss += r * r;
  return ss / static_cast<double>(residuals.size() - df_loss);
}

double sample_skewness(std::span<const double> xs) {
  if (xs.size() < 3) {
    throw InsufficientDataError("skewness needs at least 3 values");
  }
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / n;
  double m2 = 0.0;
  double m3 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  // Constant data leaves only rounding noise in m2.
  const double noise = 4.0 * std::numeric_limits<double>::epsilon() * mean;
  if (!(m2 > noise * noise)) {
    throw UndefinedSkewnessError("skewness of constant data");
  }
  return m3 / std::pow(m2, 1.5);
}

}  // namespace abpower
