#include "abpower/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "abpower/core_stats.hpp"
#include "abpower/errors.hpp"

namespace abpower::sim {
namespace {

constexpr std::uint64_t kPilotStream = 0xFFFFFFFFFFFF0000ULL;
constexpr double kMaxFailureRate = 0.01;

double standard_normal(CounterRng& rng) {
  return normal_quantile(rng.uniform());
}

// Smallest k with P(Poisson(lambda) <= k) >= u.
std::size_t poisson_quantile(double lambda, double u) {
  double pmf = std::exp(-lambda);
  double cdf = pmf;
  std::size_t k = 0;
  while (cdf < u && k < 100000) {
    ++k;
    pmf *= lambda / static_cast<double>(k);
    cdf += pmf;
    if (pmf == 0.0 && static_cast<double>(k) > lambda) break;
  }
  return k;
}

std::size_t cluster_size(const ClusterSizeLaw& law, double g_w) {
  if (law.kind == ClusterSizeLaw::Kind::kFixed) {
    return static_cast<std::size_t>(law.param);
  }
  return 1 + poisson_quantile(law.param, normal_cdf(g_w));
}

struct CovariateLoading {
  double on_y = 0.0;
  double on_w = 0.0;
  double noise = 0.0;
};

// x = on_y * g_y + on_w * g_w + noise * e has unit variance and the requested
// correlations with g_y and g_w.
std::vector<CovariateLoading> loadings(const GeneratorConfig& config) {
  const double r = config.latent_yw_correlation;
  std::vector<CovariateLoading> out;
  for (std::size_t k = 0; k < config.covariates.size(); ++k) {
    const CovariateSpec& c = config.covariates[k];
    CovariateLoading l;
    l.on_y = (c.rho_y - r * c.rho_w) / (1.0 - r * r);
    l.on_w = (c.rho_w - r * c.rho_y) / (1.0 - r * r);
    const double explained = l.on_y * c.rho_y + l.on_w * c.rho_w;
    const double residual = 1.0 - explained;
    if (residual < -1e-12) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "covariates[%zu]: correlations (rho_y=%g, rho_w=%g) are "
                    "infeasible with latent_yw_correlation=%g",
                    k, c.rho_y, c.rho_w, r);
      throw ConfigError(buf);
    }
    l.noise = std::sqrt(std::max(0.0, residual));
    out.push_back(l);
  }
  return out;
}

void check_correlation(double v, const std::string& field) {
  if (!(v >= -1.0 && v <= 1.0)) {
    throw ConfigError(field + " must lie in [-1, 1], got " +
                      std::to_string(v));
  }
}

std::string unit_name(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "u%09zu", i);
  return buf;
}

struct SplitRows {
  std::vector<ClusterRow> all;
  std::vector<ClusterRow> control;
  std::vector<ClusterRow> treatment;
};

SplitRows draw_rows(const GeneratorConfig& config, std::uint64_t stream) {
  const std::vector<EventRecord> events = generate_stream(config, stream);
  const WeightMode mode = config.w_role == WeightRole::kCount
                              ? WeightMode::kCount
                              : WeightMode::kSum;
  SplitRows out;
  out.all = aggregate(events, mode, CovariateMode::kFirst);
  for (const ClusterRow& r : out.all) {
    (r.arm == "T" ? out.treatment : out.control).push_back(r);
  }
  return out;
}

EffectEstimate effect_once(const SplitRows& rows, MetricKind kind,
                           const HarnessOptions& options) {
  const std::vector<double> xbar = covariate_mean(rows.all);
  const ArmEstimate c =
      analyze_arm(rows.control, kind, xbar, ThetaMode::kArmAdjusted).estimate;
  const ArmEstimate t =
      analyze_arm(rows.treatment, kind, xbar, ThetaMode::kArmAdjusted)
          .estimate;
  return estimate_effect(c, t, options.alpha, options.tail);
}

// Runs body(r) for r in [0, count) on a pool of threads. Results land in a
// slot per replication so the reduction order never depends on scheduling.
template <typename Outcome>
std::vector<Outcome> run_replications(
    std::size_t count, unsigned threads,
    const std::function<Outcome(std::size_t)>& body) {
  std::vector<Outcome> out(count);
  unsigned workers = threads ? threads : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, count ? count : 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t r = next++; r < count; r = next++) {
      try {
        out[r] = body(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

struct Replicate {
  bool ok = false;
  double delta = 0.0;
  double se = 0.0;
  double z = 0.0;
  double naive_se = 0.0;
};

void check_failures(std::size_t failures, std::size_t replications) {
  if (static_cast<double>(failures) >
      kMaxFailureRate * static_cast<double>(replications)) {
    throw HarnessError(std::to_string(failures) + " of " +
                       std::to_string(replications) +
                       " replications failed (limit 1%)");
  }
}

double ratio_or_one(double estimated, double empirical) {
  const double scale = std::max(std::fabs(estimated), std::fabs(empirical));
  if (scale == 0.0) return 1.0;
  if (empirical == 0.0) return std::numeric_limits<double>::infinity();
  return estimated / empirical;
}

void check_replications(std::size_t replications) {
  if (replications < 2) {
    throw ConfigError("replications must be at least 2");
  }
}

}  // namespace

double ClusterSizeLaw::mean() const {
  return kind == Kind::kFixed ? param : param + 1.0;
}

void validate(const GeneratorConfig& config) {
  if (config.n_units < 4) throw ConfigError("n_units must be at least 4");
  if (config.cluster_size.kind == ClusterSizeLaw::Kind::kFixed) {
    const double k = config.cluster_size.param;
    if (!(k >= 1.0) || k != std::floor(k) || k > 1e6) {
      throw ConfigError("cluster_size: fixed(k) needs a positive integer k");
    }
  } else if (!(config.cluster_size.param >= 0.0) ||
             !(config.cluster_size.param <= 1e4)) {
    throw ConfigError("cluster_size: poisson(lambda) needs 0 <= lambda <= 1e4");
  }
  if (!std::isfinite(config.y_law.mu) || !(config.y_law.sigma >= 0.0) ||
      !std::isfinite(config.y_law.sigma)) {
    throw ConfigError("y_law: mu must be finite and sigma >= 0");
  }
  if (!(config.psi > 0.0 && config.psi < 1.0)) {
    throw ConfigError("psi must lie in (0, 1)");
  }
  const std::size_t treated = treated_units(config);
  if (treated < 2 || config.n_units - treated < 2) {
    throw ConfigError("psi leaves fewer than 2 units in an arm");
  }
  if (!(config.icc >= 0.0 && config.icc <= 1.0)) {
    throw ConfigError("icc must lie in [0, 1]");
  }
  check_correlation(config.latent_yw_correlation, "latent_yw_correlation");
  if (std::fabs(config.latent_yw_correlation) >= 1.0) {
    throw ConfigError("latent_yw_correlation must lie strictly inside (-1, 1)");
  }
  for (std::size_t k = 0; k < config.covariates.size(); ++k) {
    const std::string prefix = "covariates[" + std::to_string(k) + "].";
    check_correlation(config.covariates[k].rho_y, prefix + "rho_y");
    check_correlation(config.covariates[k].rho_w, prefix + "rho_w");
  }
  if (!(config.w_sigma >= 0.0) || !std::isfinite(config.w_sigma)) {
    throw ConfigError("w_sigma must be finite and >= 0");
  }
  if (!std::isfinite(config.effect)) throw ConfigError("effect must be finite");
  if (!std::isfinite(config.size_slope)) {
    throw ConfigError("size_slope must be finite");
  }
  loadings(config);
}

std::size_t treated_units(const GeneratorConfig& config) {
  return static_cast<std::size_t>(
      std::llround(config.psi * static_cast<double>(config.n_units)));
}

std::vector<EventRecord> generate(const GeneratorConfig& config) {
  return generate_stream(config, 0);
}

std::vector<EventRecord> generate_stream(const GeneratorConfig& config,
                                         std::uint64_t stream) {
  validate(config);
  const std::vector<CovariateLoading> load = loadings(config);
  const CounterRng base(config.seed, stream);
  const std::size_t n_treated = treated_units(config);
  const double rho = config.latent_yw_correlation;
  const double shared = std::sqrt(config.icc);
  const double own = std::sqrt(1.0 - config.icc);
  const double mean_size = config.cluster_size.mean();

  std::vector<EventRecord> events;
  events.reserve(static_cast<std::size_t>(
      static_cast<double>(config.n_units) * mean_size * 1.1));
  for (std::size_t i = 0; i < config.n_units; ++i) {
    CounterRng rng = base.split(i);
    const double g_y = standard_normal(rng);
    const double g_w =
        rho * g_y + std::sqrt(1.0 - rho * rho) * standard_normal(rng);
    std::vector<double> x(load.size());
    for (std::size_t k = 0; k < load.size(); ++k) {
      x[k] = load[k].on_y * g_y + load[k].on_w * g_w +
             load[k].noise * standard_normal(rng);
    }
    const std::size_t size = cluster_size(config.cluster_size, g_w);
    const double size_factor =
        config.size_slope == 0.0
            ? 1.0
            : std::pow(static_cast<double>(size) / mean_size,
                       config.size_slope);
    const bool treated = i < n_treated;
    std::string id = unit_name(i);
    for (std::size_t j = 0; j < size; ++j) {
      const double l_y = shared * g_y + own * standard_normal(rng);
      double y = config.y_law.kind == EventLaw::Kind::kNormal
                     ? config.y_law.mu + config.y_law.sigma * l_y
                     : std::exp(config.y_law.mu + config.y_law.sigma * l_y);
      y *= size_factor;
      EventRecord e;
      e.unit_id = id;
      e.arm = treated ? "T" : "C";
      double w = 1.0;
      if (config.w_role == WeightRole::kEventValue) {
        const double l_w = shared * g_w + own * standard_normal(rng);
        w = std::exp(config.w_sigma * l_w);
        e.w = w;
      }
      if (treated) y += config.effect * w;
      e.y = y;
      e.covariates = x;
      events.push_back(std::move(e));
    }
  }
  return events;
}

double expected_denominator(const GeneratorConfig& config) {
  const ClusterSizeLaw& law = config.cluster_size;
  if (config.w_role == WeightRole::kCount) return law.mean();
  // E[n(g) exp(t g)] exp(s^2 (1 - icc) / 2) with t = s sqrt(icc).
  const double s = config.w_sigma;
  const double t = s * std::sqrt(config.icc);
  const double within = std::exp(0.5 * s * s * (1.0 - config.icc));
  if (law.kind == ClusterSizeLaw::Kind::kFixed) {
    return law.param * std::exp(0.5 * t * t) * within;
  }
  // n(g) = 1 + k on g in (g_{k-1}, g_k], g_k = Phi^{-1}(P(N <= k)), and
  // the integral of phi(g) e^{tg} over (a, b] is e^{t^2/2} (Phi(b-t) - Phi(a-t)).
  const double lambda = law.param;
  double pmf = std::exp(-lambda);
  double cdf = 0.0;
  double lower_mass = 0.0;  // Phi(g_{k-1} - t)
  double total = 0.0;
  std::size_t k = 0;
  for (; k < 100000; ++k) {
    if (k > 0) pmf *= lambda / static_cast<double>(k);
    cdf += pmf;
    const double upper_mass =
        cdf >= 1.0 ? 1.0 : normal_cdf(normal_quantile(cdf) - t);
    total += static_cast<double>(k + 1) * (upper_mass - lower_mass);
    lower_mass = upper_mass;
    if (cdf >= 1.0 || (pmf < 1e-300 && static_cast<double>(k) > lambda)) break;
  }
  // Whatever mass rounding left above the last step.
  total += static_cast<double>(k + 2) * (1.0 - lower_mass);
  return total * std::exp(0.5 * t * t) * within;
}

double true_effect(const GeneratorConfig& config, MetricKind kind) {
  if (is_ratio(kind)) return config.effect;
  return config.effect * expected_denominator(config);
}

VarianceProfile pilot_profile(const GeneratorConfig& config, MetricKind kind,
                              std::size_t pilot_units) {
  GeneratorConfig pilot = config;
  pilot.n_units = pilot_units;
  pilot.effect = 0.0;
  const SplitRows rows = draw_rows(pilot, kPilotStream);
  const std::vector<double> xbar = covariate_mean(rows.all);
  return profile_from(
      analyze_arm(rows.all, kind, xbar, ThetaMode::kArmAdjusted).estimate);
}

CalibrationReport calibrate_se(const GeneratorConfig& config, MetricKind kind,
                               std::size_t replications,
                               const HarnessOptions& options) {
  validate(config);
  check_replications(replications);
  if (is_adjusted(kind) && config.covariates.empty()) {
    throw ConfigError(std::string(to_string(kind)) +
                      " needs at least one covariate in the generator");
  }
  const double coverage_z =
      normal_quantile(0.5 + 0.5 * options.coverage_level);
  const double reject_z =
      normal_quantile(tail_probability(options.alpha, options.tail));

  const std::vector<Replicate> reps = run_replications<Replicate>(
      replications, options.threads, [&](std::size_t r) {
        Replicate out;
        try {
          const SplitRows rows = draw_rows(config, r + 1);
          const EffectEstimate e = effect_once(rows, kind, options);
          out = {true, e.delta, e.se, e.z, 0.0};
        } catch (const DataError&) {
          out.ok = false;
        }
        return out;
      });

  CalibrationReport report;
  report.estimator = std::string(to_string(kind));
  report.replications = replications;
  report.true_effect = true_effect(config, kind);

  std::vector<double> deltas;
  double se_sum = 0.0;
  std::size_t covered = 0;
  std::size_t rejected = 0;
  for (const Replicate& r : reps) {
    if (!r.ok) {
      ++report.failures;
      continue;
    }
    deltas.push_back(r.delta);
    se_sum += r.se;
    if (std::fabs(r.delta - report.true_effect) <= coverage_z * r.se) {
      ++covered;
    }
    const bool reject = options.tail == NormalTail::kOneSided
                            ? r.z > reject_z
                            : std::fabs(r.z) > reject_z;
    if (reject) ++rejected;
  }
  check_failures(report.failures, replications);

  const double ok = static_cast<double>(deltas.size());
  const MeanVar mv = sample_mean_var(deltas, 1);
  report.mean_estimate = mv.mean;
  report.empirical_sd = std::sqrt(mv.variance);
  report.mean_estimated_se = se_sum / ok;
  report.calibration_ratio =
      ratio_or_one(report.mean_estimated_se, report.empirical_sd);
  report.coverage = static_cast<double>(covered) / ok;
  report.rejection_rate_null = static_cast<double>(rejected) / ok;
  return report;
}

CalibrationReport empirical_power(const GeneratorConfig& config,
                                  const PowerSpec& spec, MetricKind kind,
                                  std::size_t replications,
                                  const HarnessOptions& options) {
  if (!(config.effect >= 0.0)) {
    throw ConfigError("empirical power needs effect >= 0");
  }
  HarnessOptions opts = options;
  opts.alpha = spec.alpha;
  opts.tail = spec.tail;
  CalibrationReport report = calibrate_se(config, kind, replications, opts);
  report.empirical_power = report.rejection_rate_null;

  const double effect = true_effect(config, kind);
  if (effect > 0.0) {
    const VarianceProfile profile = pilot_profile(config, kind);
    report.predicted_power =
        solve_power(spec.alpha, effect, profile,
                    static_cast<std::int64_t>(config.n_units), config.psi,
                    spec.tail);
  } else {
    report.predicted_power = spec.alpha;
  }
  return report;
}

double effect_for_power(const GeneratorConfig& config, MetricKind kind,
                        double alpha, double power, NormalTail tail) {
  const VarianceProfile profile = pilot_profile(config, kind);
  const double se = planning_se(
      profile, static_cast<std::int64_t>(config.n_units), config.psi);
  const double mde = solve_mde(alpha, power, se, tail);
  GeneratorConfig unit = config;
  unit.effect = 1.0;
  return mde / true_effect(unit, kind);
}

double naive_weighted_se(std::span<const ClusterRow> rows) {
  if (rows.size() < 2) {
    throw InsufficientDataError("weighted average SE needs at least 2 units");
  }
  std::vector<double> v;
  v.reserve(rows.size());
  double w_sum = 0.0;
  double w2_sum = 0.0;
  for (const ClusterRow& r : rows) {
    if (!(r.w > 0.0)) {
      throw DegenerateDenominatorError("cluster '" + r.unit_id +
                                       "' has a non-positive weight");
    }
    v.push_back(r.y / r.w);
    w_sum += r.w;
    w2_sum += r.w * r.w;
  }
  const double s2 = sample_mean_var(v, 1).variance;
  return std::sqrt(w2_sum / (w_sum * w_sum) * s2);
}

PitfallReport pitfall_weighted_regression(const GeneratorConfig& config,
                                          std::size_t replications,
                                          const HarnessOptions& options) {
  validate(config);
  check_replications(replications);
  const std::vector<Replicate> reps = run_replications<Replicate>(
      replications, options.threads, [&](std::size_t r) {
        Replicate out;
        try {
          const SplitRows rows = draw_rows(config, r + 1);
          const ArmEstimate c = estimate_arm_ratio(rows.control);
          const ArmEstimate t = estimate_arm_ratio(rows.treatment);
          out.delta = t.estimate - c.estimate;
          out.se = std::hypot(c.se, t.se);
          out.naive_se = std::hypot(naive_weighted_se(rows.control),
                                    naive_weighted_se(rows.treatment));
          out.ok = true;
        } catch (const DataError&) {
          out.ok = false;
        }
        return out;
      });

  PitfallReport report;
  report.replications = replications;
  std::vector<double> deltas;
  double se_sum = 0.0;
  double naive_sum = 0.0;
  for (const Replicate& r : reps) {
    if (!r.ok) {
      ++report.failures;
      continue;
    }
    deltas.push_back(r.delta);
    se_sum += r.se;
    naive_sum += r.naive_se;
  }
  check_failures(report.failures, replications);
  const double ok = static_cast<double>(deltas.size());
  report.empirical_sd = std::sqrt(sample_mean_var(deltas, 1).variance);
  report.mean_delta_se = se_sum / ok;
  report.mean_naive_se = naive_sum / ok;
  report.delta_calibration_ratio =
      ratio_or_one(report.mean_delta_se, report.empirical_sd);
  report.naive_calibration_ratio =
      ratio_or_one(report.mean_naive_se, report.empirical_sd);
  if (std::fabs(report.naive_calibration_ratio - 1.0) < 1e-12) {
    report.naive_direction = "calibrated";
  } else {
    report.naive_direction = report.naive_calibration_ratio < 1.0
                                 ? "underestimates"
                                 : "overestimates";
  }
  report.naive_worse = std::fabs(report.naive_calibration_ratio - 1.0) >
                       std::fabs(report.delta_calibration_ratio - 1.0);
  return report;
}

}  // namespace abpower::sim
