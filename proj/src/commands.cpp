#include "abpower/commands.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "abpower/errors.hpp"

namespace abpower {
namespace {

using nlohmann::json;

// Skewness warnings fire outside this allocation band...
constexpr double kBalancedLow = 0.4;
constexpr double kBalancedHigh = 0.6;
// ...when |skewness| of the residuals exceeds this.
constexpr double kSkewnessLimit = 1.0;

// Calibration bands at 10,000 replications; they widen as 1/sqrt(reps).
constexpr double kReferenceReplications = 10000.0;
constexpr double kRatioHalfWidth = 0.03;
constexpr double kCoverageHalfWidth = 0.01;
constexpr double kSizeHalfWidth = 0.01;
constexpr double kPowerHalfWidth = 0.02;

json number_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

json optional_skewness(std::span<const double> residuals) {
  try {
    return sample_skewness(residuals);
  } catch (const DataError&) {
    return nullptr;
  }
}

std::vector<std::string> skewness_warnings(const json& skewness, double psi) {
  std::vector<std::string> out;
  if (skewness.is_number() &&
      std::fabs(skewness.get<double>()) > kSkewnessLimit &&
      (psi < kBalancedLow || psi > kBalancedHigh)) {
    out.push_back(
        "residuals are skewed and the split is not near 50/50; normal-theory "
        "p-values and power may be inaccurate at this sample size");
  }
  return out;
}

json arm_json(const ArmEstimate& arm) {
  return {{"metric_kind", to_string(arm.metric_kind)},
          {"estimate", arm.estimate},
          {"denom_mean", arm.denom_mean},
          {"residual_sd", arm.residual_sd},
          {"n_units", arm.n_units},
          {"df", arm.df},
          {"se", arm.se}};
}

json profile_json(const VarianceProfile& p) {
  return {{"metric_kind", to_string(p.metric_kind)},
          {"residual_sd", p.residual_sd},
          {"denom_mean", p.denom_mean},
          {"effective_sd", p.effective_sd()},
          {"source_n", p.source_n}};
}

json solution_json(const PowerSolution& s) {
  return {{"solved_for", to_string(s.solved_for)},
          {"alpha", s.alpha},
          {"power", s.power},
          {"mde", s.mde},
          {"n", s.n},
          {"psi", s.psi},
          {"tail", to_string(s.tail)},
          {"effective_sd", s.effective_sd},
          {"allocation_factor", s.allocation_factor},
          {"planning_se", s.planning_se},
          {"achieved_power", s.achieved_power}};
}

json input_json(const RunConfig& config, std::span<const EventRecord> events,
                std::span<const ClusterRow> rows) {
  json input = {{"path", config.input_path},
                {"events", events.size()},
                {"units", rows.size()},
                {"y", config.y_column},
                {"unit", config.unit_column},
                {"w_mode", to_string(config.effective_w_mode())},
                {"cov_mode", to_string(config.cov_mode)},
                {"covariates", config.covariate_columns}};
  input["w"] = config.w_column ? json(*config.w_column) : json(nullptr);
  return input;
}

void attach_seed(json& report, const RunConfig& config) {
  const auto seed = resolve_seed(config.seed);
  report["seed"] = seed ? json(*seed) : json(nullptr);
}

double sum_of_squares(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x * x;
  return s;
}

bool is_default_control(const std::string& label) {
  std::string lower;
  for (char c : label) {
    lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return lower == "c" || lower == "control";
}

json band(double value, double low, double high) {
  return {{"value", value},
          {"low", low},
          {"high", high},
          {"pass", value >= low && value <= high}};
}

json generator_json(const sim::GeneratorConfig& g) {
  json covs = json::array();
  for (const auto& c : g.covariates) {
    covs.push_back({{"rho_y", c.rho_y}, {"rho_w", c.rho_w}});
  }
  const bool fixed = g.cluster_size.kind == sim::ClusterSizeLaw::Kind::kFixed;
  const bool normal = g.y_law.kind == sim::EventLaw::Kind::kNormal;
  return {{"n_units", g.n_units},
          {"cluster_size", (fixed ? "fixed:" : "poisson:") +
                               json(g.cluster_size.param).dump()},
          {"y_law", std::string(normal ? "normal" : "lognormal")},
          {"y_mu", g.y_law.mu},
          {"y_sigma", g.y_law.sigma},
          {"w_role", g.w_role == sim::WeightRole::kCount ? "count"
                                                          : "event_value"},
          {"covariates", covs},
          {"effect", g.effect},
          {"seed", g.seed},
          {"psi", g.psi},
          {"icc", g.icc},
          {"latent_yw_correlation", g.latent_yw_correlation},
          {"w_sigma", g.w_sigma},
          {"size_slope", g.size_slope}};
}

json calibration_json(const sim::CalibrationReport& r) {
  json out = {{"estimator", r.estimator},
              {"replications", r.replications},
              {"failures", r.failures},
              {"true_effect", r.true_effect},
              {"mean_estimate", r.mean_estimate},
              {"mean_estimated_se", r.mean_estimated_se},
              {"empirical_sd", r.empirical_sd},
              {"calibration_ratio", number_or_null(r.calibration_ratio)},
              {"coverage", r.coverage},
              {"rejection_rate_null", r.rejection_rate_null}};
  out["empirical_power"] =
      r.empirical_power ? json(*r.empirical_power) : json(nullptr);
  out["predicted_power"] =
      r.predicted_power ? json(*r.predicted_power) : json(nullptr);
  return out;
}

void flatten(const json& node, const std::string& prefix,
             std::ostringstream& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      flatten(value, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else if (node.is_array()) {
    if (node.empty()) out << prefix << "=[]\n";
    for (std::size_t i = 0; i < node.size(); ++i) {
      flatten(node[i], prefix + "[" + std::to_string(i) + "]", out);
    }
  } else if (node.is_string()) {
    out << prefix << "=" << node.get<std::string>() << "\n";
  } else {
    out << prefix << "=" << node.dump() << "\n";
  }
}

}  // namespace

json plan_from_events(const RunConfig& config,
                      std::span<const EventRecord> events) {
  const PowerSpec spec = config.power_spec();
  const MetricKind kind = config.effective_metric();
  const std::vector<ClusterRow> rows =
      aggregate(events, config.effective_w_mode(), config.cov_mode);
  const std::vector<double> xbar = covariate_mean(rows);

  const ArmAnalysis fit =
      analyze_arm(rows, kind, xbar, ThetaMode::kUnadjusted);
  const VarianceProfile profile = profile_from(fit.estimate);
  const PowerSolution solution = solve(spec, profile);

  json report = {{"schema", kReportSchema},
                 {"command", "plan"},
                 {"metric", to_string(kind)},
                 {"input", input_json(config, events, rows)},
                 {"estimate", arm_json(fit.estimate)},
                 {"profile", profile_json(profile)},
                 {"solution", solution_json(solution)}};

  if (is_adjusted(kind)) {
    const MetricKind base_kind =
        is_ratio(kind) ? MetricKind::kRatio : MetricKind::kMean;
    const ArmAnalysis base = analyze_arm(rows, base_kind, {}, {});
    const double base_eff = profile_from(base.estimate).effective_sd();
    const double base_ss = sum_of_squares(base.residuals);
    json unadjusted = profile_json(profile_from(base.estimate));
    report["unadjusted"] = unadjusted;
    report["variance_reduction"] =
        base_eff > 0.0
            ? json(1.0 - std::pow(profile.effective_sd() / base_eff, 2))
            : json(nullptr);
    report["residual_r2"] =
        base_ss > 0.0 ? json(1.0 - sum_of_squares(fit.residuals) / base_ss)
                      : json(nullptr);
  }

  const json skew = optional_skewness(fit.residuals);
  report["diagnostics"] = {{"skewness", skew},
                           {"warnings", skewness_warnings(skew, spec.psi)}};
  attach_seed(report, config);
  return report;
}

json run_plan(const RunConfig& config) {
  config.power_spec();
  return plan_from_events(config,
                          ingest_csv(config.input_path, config.csv_schema()));
}

json analyze_from_events(const RunConfig& config,
                         std::span<const EventRecord> events) {
  if (!config.arm_column) throw ConfigError("analyze requires --arm");
  const MetricKind kind = config.effective_metric();
  const std::vector<ClusterRow> rows =
      aggregate(events, config.effective_w_mode(), config.cov_mode);

  std::set<std::string> labels;
  for (const ClusterRow& r : rows) labels.insert(r.arm.value_or(""));
  if (labels.size() != 2) {
    throw DesignError("expected exactly 2 arm labels, found " +
                      std::to_string(labels.size()));
  }
  std::string control;
  if (config.control_label) {
    if (!labels.contains(*config.control_label)) {
      throw DesignError("control label '" + *config.control_label +
                        "' does not occur in column '" + *config.arm_column +
                        "'");
    }
    control = *config.control_label;
  } else {
    int matches = 0;
    for (const std::string& l : labels) {
      if (is_default_control(l)) {
        control = l;
        ++matches;
      }
    }
    if (matches != 1) {
      throw DesignError(
          "cannot tell which arm is control; name it with --control");
    }
  }
  const std::string treatment =
      *labels.begin() == control ? *labels.rbegin() : *labels.begin();

  std::vector<ClusterRow> c_rows;
  std::vector<ClusterRow> t_rows;
  for (const ClusterRow& r : rows) {
    (r.arm == control ? c_rows : t_rows).push_back(r);
  }
  const std::vector<double> xbar = covariate_mean(rows);
  const ArmAnalysis c = analyze_arm(c_rows, kind, xbar, ThetaMode::kArmAdjusted);
  const ArmAnalysis t = analyze_arm(t_rows, kind, xbar, ThetaMode::kArmAdjusted);
  const EffectEstimate effect =
      estimate_effect(c.estimate, t.estimate, config.alpha, config.tail);

  std::vector<double> pooled = c.residuals;
  pooled.insert(pooled.end(), t.residuals.begin(), t.residuals.end());
  const json skew = optional_skewness(pooled);
  const double psi_observed = static_cast<double>(t_rows.size()) /
                              static_cast<double>(rows.size());

  json c_json = arm_json(c.estimate);
  c_json["label"] = control;
  json t_json = arm_json(t.estimate);
  t_json["label"] = treatment;

  json report = {
      {"schema", kReportSchema},
      {"command", "analyze"},
      {"metric", to_string(kind)},
      {"input", input_json(config, events, rows)},
      {"covariate_mean", xbar},
      {"arms", {{"control", c_json}, {"treatment", t_json}}},
      {"effect",
       {{"delta", effect.delta},
        {"se", effect.se},
        {"z", number_or_null(effect.z)},
        {"p_value", effect.p_value},
        {"tail", to_string(effect.tail)},
        {"alpha", effect.alpha},
        {"ci_low", number_or_null(effect.ci_low)},
        {"ci_high", number_or_null(effect.ci_high)}}},
      {"diagnostics",
       {{"skewness", skew},
        {"psi_observed", psi_observed},
        {"warnings", skewness_warnings(skew, psi_observed)}}}};
  attach_seed(report, config);
  return report;
}

json run_analyze(const RunConfig& config) {
  if (!config.arm_column) throw ConfigError("analyze requires --arm");
  return analyze_from_events(
      config, ingest_csv(config.input_path, config.csv_schema()));
}

json simulate_from_file(const RunConfig& config, SimulationFile file) {
  if (const auto seed = resolve_seed(config.seed)) file.generator.seed = *seed;
  if (config.scenario) file.scenario = *config.scenario;
  if (config.estimator) file.estimator = *config.estimator;
  if (config.replications) file.replications = *config.replications;
  if (config.alpha_given) file.alpha = config.alpha;
  if (config.tail_given) file.tail = config.tail;
  if (config.psi_given) file.generator.psi = config.psi;
  if (config.power) file.target_power = config.power;
  sim::validate(file.generator);
  if (file.replications < 2) {
    throw ConfigError("replications must be at least 2");
  }

  const double scale = std::sqrt(kReferenceReplications /
                                 static_cast<double>(file.replications));
  sim::HarnessOptions options;
  options.alpha = file.alpha;
  options.tail = file.tail;

  json report = {{"schema", kReportSchema},
                 {"command", "simulate"},
                 {"scenario", to_string(file.scenario)}};
  json bands = json::object();
  const double ratio_lo = 1.0 - kRatioHalfWidth * scale;
  const double ratio_hi = 1.0 + kRatioHalfWidth * scale;

  if (file.scenario == Scenario::kPitfall) {
    const sim::PitfallReport r = sim::pitfall_weighted_regression(
        file.generator, file.replications, options);
    report["estimator"] = "ratio";
    report["report"] = {
        {"replications", r.replications},
        {"failures", r.failures},
        {"empirical_sd", r.empirical_sd},
        {"mean_delta_se", r.mean_delta_se},
        {"mean_naive_se", r.mean_naive_se},
        {"delta_calibration_ratio", number_or_null(r.delta_calibration_ratio)},
        {"naive_calibration_ratio", number_or_null(r.naive_calibration_ratio)},
        {"naive_direction", r.naive_direction},
        {"naive_worse", r.naive_worse}};
    bands["delta_calibration_ratio"] =
        band(r.delta_calibration_ratio, ratio_lo, ratio_hi);
  } else {
    report["estimator"] = to_string(file.estimator);
    sim::CalibrationReport r;
    if (file.scenario == Scenario::kPower) {
      if (file.target_power) {
        file.generator.effect =
            sim::effect_for_power(file.generator, file.estimator, file.alpha,
                                  *file.target_power, file.tail);
      }
      PowerSpec spec;
      spec.alpha = file.alpha;
      spec.tail = file.tail;
      spec.psi = file.generator.psi;
      r = sim::empirical_power(file.generator, spec, file.estimator,
                               file.replications, options);
      const double half = kPowerHalfWidth * scale;
      bands["empirical_power"] =
          band(*r.empirical_power, *r.predicted_power - half,
               *r.predicted_power + half);
    } else {
      r = sim::calibrate_se(file.generator, file.estimator, file.replications,
                            options);
      bands["calibration_ratio"] = band(r.calibration_ratio, ratio_lo, ratio_hi);
      const double cov_half = kCoverageHalfWidth * scale;
      bands["coverage"] = band(r.coverage, 0.95 - cov_half, 0.95 + cov_half);
      if (file.generator.effect == 0.0) {
        const double size_half = kSizeHalfWidth * scale;
        bands["rejection_rate_null"] =
            band(r.rejection_rate_null, file.alpha - size_half,
                 file.alpha + size_half);
      }
    }
    report["report"] = calibration_json(r);
  }
  report["generator"] = generator_json(file.generator);
  report["alpha"] = file.alpha;
  report["tail"] = to_string(file.tail);
  bool pass = true;
  for (const auto& [name, b] : bands.items()) pass = pass && b["pass"].get<bool>();
  report["bands"] = bands;
  report["pass"] = pass;
  return report;
}

json run_simulate(const RunConfig& config) {
  if (config.generator_path.empty()) {
    throw ConfigError("simulate requires --config <generator file>");
  }
  return simulate_from_file(config,
                            load_simulation_file(config.generator_path));
}

std::string render_text(const json& report) {
  std::ostringstream out;
  flatten(report, "", out);
  return out.str();
}

std::string render(const json& report, OutputFormat format) {
  return format == OutputFormat::kJson ? report.dump(2) + "\n"
                                       : render_text(report);
}

}  // namespace abpower
