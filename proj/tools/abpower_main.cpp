// abpower: power analysis and effect estimation for mean and ratio metrics.
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "abpower/commands.hpp"
#include "abpower/errors.hpp"

namespace {

using abpower::RunConfig;

struct RawFlags {
  std::string metric = "mean";
  std::string tail = "one";
  std::string format = "text";
  std::string w_mode;
  std::string cov_mode = "sum";
  std::string covariates;
  std::string w;
  std::string arm;
  std::string scenario;
  std::string estimator;
};

void add_common(CLI::App* cmd, RunConfig& cfg, RawFlags& raw) {
  cmd->add_option("--alpha", cfg.alpha, "significance level");
  cmd->add_option("--power", cfg.power, "target power");
  cmd->add_option("--mde", cfg.mde, "minimum detectable effect");
  cmd->add_option("--n", cfg.n, "total units across both arms");
  cmd->add_option("--psi", cfg.psi, "fraction of units in treatment");
  cmd->add_option("--tail", raw.tail, "one|two");
  cmd->add_option("--metric", raw.metric, "mean|ratio");
  cmd->add_option("--y", cfg.y_column, "numerator column");
  cmd->add_option("--w", raw.w, "denominator column");
  cmd->add_option("--unit", cfg.unit_column, "unit (cluster) id column");
  cmd->add_option("--arm", raw.arm, "arm label column");
  cmd->add_option("--covariates", raw.covariates, "comma-separated columns");
  cmd->add_option("--w-mode", raw.w_mode, "sum|count");
  cmd->add_option("--cov-mode", raw.cov_mode, "sum|mean|first");
  cmd->add_option("--format", raw.format, "text|json");
  cmd->add_option("--seed", cfg.seed, "seed (falls back to ABPOWER_SEED)");
}

void finish(CLI::App& app, RunConfig& cfg, const RawFlags& raw,
            CLI::App* sub) {
  cfg.metric = abpower::parse_metric_kind(raw.metric);
  if (cfg.metric != abpower::MetricKind::kMean &&
      cfg.metric != abpower::MetricKind::kRatio) {
    throw abpower::ConfigError("--metric must be mean or ratio");
  }
  cfg.tail = abpower::parse_tail(raw.tail);
  cfg.output_format = abpower::parse_output_format(raw.format);
  if (!raw.w_mode.empty()) cfg.w_mode = abpower::parse_weight_mode(raw.w_mode);
  cfg.cov_mode = abpower::parse_covariate_mode(raw.cov_mode);
  if (!raw.w.empty()) cfg.w_column = raw.w;
  if (!raw.arm.empty()) cfg.arm_column = raw.arm;
  if (!raw.covariates.empty()) {
    std::string item;
    for (char c : raw.covariates + ",") {
      if (c == ',') {
        if (item.empty()) throw abpower::ConfigError("--covariates: empty name");
        cfg.covariate_columns.push_back(item);
        item.clear();
      } else {
        item.push_back(c);
      }
    }
  }
  if (!raw.scenario.empty()) cfg.scenario = abpower::parse_scenario(raw.scenario);
  if (!raw.estimator.empty()) {
    cfg.estimator = abpower::parse_metric_kind(raw.estimator);
  }
  cfg.alpha_given = sub->count("--alpha") > 0;
  cfg.psi_given = sub->count("--psi") > 0;
  cfg.tail_given = sub->count("--tail") > 0;
  (void)app;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"abpower: A/B test power analysis for mean and ratio metrics"};
  app.require_subcommand(1);
  RunConfig cfg;
  RawFlags raw;

  auto* plan = app.add_subcommand("plan", "size an experiment from historical data");
  add_common(plan, cfg, raw);
  plan->add_option("input", cfg.input_path, "CSV file")->required();

  auto* analyze = app.add_subcommand("analyze", "estimate treatment minus control");
  add_common(analyze, cfg, raw);
  analyze->add_option("input", cfg.input_path, "CSV file")->required();
  analyze->add_option("--control", cfg.control_label, "label of the control arm");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo calibration check");
  add_common(simulate, cfg, raw);
  simulate->add_option("--config", cfg.generator_path, "generator config file")
      ->required();
  simulate->add_option("--scenario", raw.scenario, "calibrate|power|pitfall");
  simulate->add_option("--estimator", raw.estimator,
                       "mean|ratio|adjusted_mean|adjusted_ratio");
  simulate->add_option("--replications", cfg.replications, "Monte Carlo reps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return abpower::kExitConfig;
  }

  try {
    nlohmann::json report;
    if (plan->parsed()) {
      cfg.command = abpower::Command::kPlan;
      finish(app, cfg, raw, plan);
      report = abpower::run_plan(cfg);
    } else if (analyze->parsed()) {
      cfg.command = abpower::Command::kAnalyze;
      finish(app, cfg, raw, analyze);
      report = abpower::run_analyze(cfg);
    } else {
      cfg.command = abpower::Command::kSimulate;
      finish(app, cfg, raw, simulate);
      report = abpower::run_simulate(cfg);
    }
    std::cout << abpower::render(report, cfg.output_format);
    if (report.contains("pass") && !report["pass"].get<bool>()) {
      std::cerr << "abpower: calibration band violated\n";
      return abpower::kExitCalibration;
    }
    return abpower::kExitOk;
  } catch (const abpower::ConfigError& e) {
    std::cerr << "abpower: " << e.what() << "\n";
    return abpower::kExitConfig;
  } catch (const abpower::DataError& e) {
    std::cerr << "abpower: " << e.what() << "\n";
    return abpower::kExitData;
  } catch (const abpower::Error& e) {
    std::cerr << "abpower: " << e.what() << "\n";
    return abpower::kExitData;
  }
}
