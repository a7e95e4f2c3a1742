#include "abpower/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "abpower/errors.hpp"

namespace abpower {
namespace {

void require_rows(std::span<const ClusterRow> rows, std::size_t minimum,
                  std::string_view what) {
  if (rows.size() < minimum) {
    throw InsufficientDataError(std::string(what) + " needs at least " +
                                std::to_string(minimum) + " units, got " +
                                std::to_string(rows.size()));
  }
}

std::size_t arity_of(std::span<const ClusterRow> rows) {
  return rows.empty() ? 0 : rows.front().x.size();
}

void require_xbar(std::span<const ClusterRow> rows,
                  std::span<const double> xbar) {
  if (xbar.size() != arity_of(rows)) {
    throw SchemaError("covariate mean has " + std::to_string(xbar.size()) +
                      " entries, rows have " +
                      std::to_string(arity_of(rows)) + " covariates");
  }
}

double mean_of(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

std::vector<double> column_y(std::span<const ClusterRow> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const ClusterRow& r : rows) out.push_back(r.y);
  return out;
}

std::vector<double> column_w(std::span<const ClusterRow> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const ClusterRow& r : rows) out.push_back(r.w);
  return out;
}

ArmEstimate finish(MetricKind kind, double estimate, double denom_mean,
                   double residual_var, std::size_t n, std::size_t df) {
  ArmEstimate out;
  out.metric_kind = kind;
  out.estimate = estimate;
  out.denom_mean = denom_mean;
  out.residual_sd = std::sqrt(residual_var);
  out.n_units = n;
  out.df = df;
  out.se = out.residual_sd / (std::sqrt(static_cast<double>(n)) * denom_mean);
  return out;
}

ArmAnalysis mean_analysis(std::span<const ClusterRow> rows) {
  require_rows(rows, 2, "mean estimate");
  std::vector<double> y = column_y(rows);
  const MeanVar mv = sample_mean_var(y, 1);
  for (double& v : y) v -= mv.mean;
  return {finish(MetricKind::kMean, mv.mean, 1.0, mv.variance, rows.size(),
                 rows.size() - 1),
          std::move(y)};
}

ArmAnalysis ratio_analysis(std::span<const ClusterRow> rows) {
  require_rows(rows, 2, "ratio estimate");
  const std::vector<double> y = column_y(rows);
  const std::vector<double> w = column_w(rows);
  const double ybar = mean_of(y);
  const double wbar = mean_of(w);
  if (!(wbar > 0.0)) {
    throw DegenerateDenominatorError(
        "ratio estimate needs a positive mean denominator, got " +
        std::to_string(wbar));
  }
  const double theta = ybar / wbar;
  std::vector<double> residuals(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    residuals[i] = y[i] - theta * w[i];
  }
  const double s2 = residual_variance(residuals, 1);
  return {finish(MetricKind::kRatio, theta, wbar, s2, rows.size(),
                 rows.size() - 1),
          std::move(residuals)};
}

ArmAnalysis adjusted_mean_analysis(std::span<const ClusterRow> rows,
                                   std::span<const double> xbar) {
  require_xbar(rows, xbar);
  require_rows(rows, xbar.size() + 2, "adjusted mean estimate");
  const OlsFit fit = fit_ols(design_of(rows), column_y(rows));
  const double s2 = fit.residual_ss / static_cast<double>(fit.df);
  return {finish(MetricKind::kAdjustedMean, fit.predict(xbar), 1.0, s2,
                 rows.size(), fit.df),
          fit.residuals};
}

ArmAnalysis adjusted_ratio_analysis(std::span<const ClusterRow> rows,
                                    std::span<const double> xbar,
                                    ThetaMode theta_mode) {
  require_xbar(rows, xbar);
  require_rows(rows, xbar.size() + 2, "adjusted ratio estimate");
  const std::vector<double> y = column_y(rows);
  const std::vector<double> w = column_w(rows);
  const double ybar = mean_of(y);
  const double wbar = mean_of(w);
  if (!(wbar > 0.0)) {
    throw DegenerateDenominatorError(
        "ratio estimate needs a positive mean denominator, got " +
        std::to_string(wbar));
  }
  const Matrix design = design_of(rows);
  const OlsFit y_fit = fit_ols(design, y);
  const OlsFit w_fit = fit_ols(design, w);
  const double mu_y = y_fit.predict(xbar);
  const double mu_w = w_fit.predict(xbar);
  if (!(mu_w > 0.0)) {
    throw DegenerateDenominatorError(
        "adjusted denominator mean must be positive, got " +
        std::to_string(mu_w));
  }
  const double theta = mu_y / mu_w;
  const double residual_theta =
      theta_mode == ThetaMode::kArmAdjusted ? theta : ybar / wbar;

  std::vector<double> residuals(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    residuals[i] = y_fit.residuals[i] - residual_theta * w_fit.residuals[i];
  }
  const double s2 = residual_variance(residuals, xbar.size() + 1);
  return {finish(MetricKind::kAdjustedRatio, theta, mu_w, s2, rows.size(),
                 y_fit.df),
          std::move(residuals)};
}

}  // namespace

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::kMean:
      return "mean";
    case MetricKind::kRatio:
      return "ratio";
    case MetricKind::kAdjustedMean:
      return "adjusted_mean";
    case MetricKind::kAdjustedRatio:
      return "adjusted_ratio";
  }
  return "?";
}

MetricKind parse_metric_kind(std::string_view text) {
  if (text == "mean") return MetricKind::kMean;
  if (text == "ratio") return MetricKind::kRatio;
  if (text == "adjusted_mean") return MetricKind::kAdjustedMean;
  if (text == "adjusted_ratio") return MetricKind::kAdjustedRatio;
  throw ConfigError("unknown metric kind '" + std::string(text) + "'");
}

bool is_ratio(MetricKind kind) {
  return kind == MetricKind::kRatio || kind == MetricKind::kAdjustedRatio;
}

bool is_adjusted(MetricKind kind) {
  return kind == MetricKind::kAdjustedMean ||
         kind == MetricKind::kAdjustedRatio;
}

std::vector<double> covariate_mean(std::span<const ClusterRow> rows) {
  const std::size_t p = arity_of(rows);
  std::vector<double> mean(p, 0.0);
  if (rows.empty()) return mean;
  for (const ClusterRow& r : rows) {
    for (std::size_t j = 0; j < p; ++j) mean[j] += r.x[j];
  }
  for (double& m : mean) m /= static_cast<double>(rows.size());
  return mean;
}

Matrix design_of(std::span<const ClusterRow> rows) {
  const std::size_t p = arity_of(rows);
  Matrix m(rows.size(), p);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].x.size() != p) {
      throw SchemaError("unit '" + rows[i].unit_id +
                        "' has a different covariate arity");
    }
    for (std::size_t j = 0; j < p; ++j) m(i, j) = rows[i].x[j];
  }
  return m;
}

ArmEstimate estimate_arm_mean(std::span<const ClusterRow> rows) {
  return mean_analysis(rows).estimate;
}

ArmEstimate estimate_arm_ratio(std::span<const ClusterRow> rows) {
  return ratio_analysis(rows).estimate;
}

ArmEstimate estimate_arm_adjusted_mean(std::span<const ClusterRow> rows,
                                       std::span<const double> xbar) {
  return adjusted_mean_analysis(rows, xbar).estimate;
}

ArmEstimate estimate_arm_adjusted_ratio(std::span<const ClusterRow> rows,
                                        std::span<const double> xbar,
                                        ThetaMode theta_mode) {
  return adjusted_ratio_analysis(rows, xbar, theta_mode).estimate;
}

ArmAnalysis analyze_arm(std::span<const ClusterRow> rows, MetricKind kind,
                        std::span<const double> xbar, ThetaMode theta_mode) {
  switch (kind) {
    case MetricKind::kMean:
      return mean_analysis(rows);
    case MetricKind::kRatio:
      return ratio_analysis(rows);
    case MetricKind::kAdjustedMean:
      return adjusted_mean_analysis(rows, xbar);
    case MetricKind::kAdjustedRatio:
      return adjusted_ratio_analysis(rows, xbar, theta_mode);
  }
  throw ConfigError("unknown metric kind");
}

EffectEstimate estimate_effect(const ArmEstimate& control,
                               const ArmEstimate& treatment, double alpha,
                               NormalTail tail) {
  if (control.metric_kind != treatment.metric_kind) {
    throw IncompatibleArmsError(
        "cannot compare a " + std::string(to_string(control.metric_kind)) +
        " arm with a " + std::string(to_string(treatment.metric_kind)) +
        " arm");
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  EffectEstimate out;
  out.tail = tail;
  out.alpha = alpha;
  out.delta = treatment.estimate - control.estimate;
  out.se = std::hypot(control.se, treatment.se);
  if (out.se > 0.0) {
    out.z = out.delta / out.se;
  } else {
    out.z = out.delta == 0.0 ? 0.0 : std::copysign(kInf, out.delta);
  }

  auto upper = [](double z) {
    if (std::isinf(z)) return z > 0 ? 0.0 : 1.0;
    return normal_survival(z);
  };
  const double crit = normal_quantile(tail_probability(alpha, tail));
  if (tail == NormalTail::kOneSided) {
    out.p_value = upper(out.z);
    out.ci_low = out.delta - crit * out.se;
    out.ci_high = kInf;
  } else {
    out.p_value = std::min(1.0, 2.0 * upper(std::fabs(out.z)));
    out.ci_low = out.delta - crit * out.se;
    out.ci_high = out.delta + crit * out.se;
  }
  return out;
}

}  // namespace abpower
