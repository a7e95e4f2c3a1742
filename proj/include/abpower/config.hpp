#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abpower/aggregation.hpp"
#include "abpower/core_stats.hpp"
#include "abpower/csv.hpp"
#include "abpower/estimators.hpp"
#include "abpower/power.hpp"
#include "abpower/simulation.hpp"

namespace abpower {

enum class Command { kPlan, kAnalyze, kSimulate };
enum class OutputFormat { kText, kJson };

std::string_view to_string(Command command);
OutputFormat parse_output_format(std::string_view text);

enum class Scenario { kCalibrate, kPower, kPitfall };
std::string_view to_string(Scenario scenario);
Scenario parse_scenario(std::string_view text);

// Everything one CLI invocation needs, after flag parsing.
struct RunConfig {
  Command command = Command::kPlan;
  std::string input_path;
  // mean or ratio; covariates turn these into their adjusted kinds.
  MetricKind metric = MetricKind::kMean;
  std::string y_column = "y";
  std::optional<std::string> w_column;
  std::string unit_column = "unit";
  std::optional<std::string> arm_column;
  std::vector<std::string> covariate_columns;
  std::optional<WeightMode> w_mode;
  CovariateMode cov_mode = CovariateMode::kSum;
  double alpha = 0.05;
  double psi = 0.5;
  NormalTail tail = NormalTail::kOneSided;
  std::optional<double> mde;
  std::optional<std::int64_t> n;
  std::optional<double> power;
  OutputFormat output_format = OutputFormat::kText;
  std::optional<std::uint64_t> seed;
  // analyze: label of the control arm; by default "C" or "control".
  std::optional<std::string> control_label;

  // simulate
  std::string generator_path;
  std::optional<Scenario> scenario;
  std::optional<MetricKind> estimator;
  std::optional<std::size_t> replications;
  bool psi_given = false;
  bool alpha_given = false;
  bool tail_given = false;

  MetricKind effective_metric() const;
  WeightMode effective_w_mode() const;
  CsvSchema csv_schema() const;
  // The one member of {power, mde, n} left unset. Throws SpecError when the
  // plan is under- or overdetermined.
  SolveTarget solve_target() const;
  PowerSpec power_spec() const;
};

// Generator config plus the harness settings a config file may carry.
struct SimulationFile {
  sim::GeneratorConfig generator;
  Scenario scenario = Scenario::kCalibrate;
  MetricKind estimator = MetricKind::kRatio;
  std::size_t replications = 1000;
  double alpha = 0.05;
  NormalTail tail = NormalTail::kOneSided;
  // Power scenario: tune the effect so this power is predicted.
  std::optional<double> target_power;
};

// Parses a generator config. JSON when the first non-blank character is '{',
// otherwise key=value lines ('#' starts a comment). Errors name the field.
//
//   n_units=200
//   cluster_size=poisson:3        # or fixed:1
//   y_law=lognormal:0,0.5         # or normal:mu,sigma
//   w_role=count                  # or event_value
//   covariates=0.8:0.8,0.3:0      # rho_y:rho_w per covariate
//   effect=0  seed=7  psi=0.5  icc=0.5  latent_yw_correlation=0.5
//   w_sigma=0.5  size_slope=0
//   scenario=calibrate  estimator=ratio  replications=1000
//   alpha=0.05  tail=one  target_power=0.8
SimulationFile parse_simulation_file(std::string_view text);
SimulationFile load_simulation_file(const std::string& path);

// --seed, then ABPOWER_SEED, then nothing.
std::optional<std::uint64_t> resolve_seed(std::optional<std::uint64_t> flag);

}  // namespace abpower
