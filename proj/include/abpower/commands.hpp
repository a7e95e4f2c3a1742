#pragma once

#include <span>
#include <string>

#include "abpower/config.hpp"
#include "json.hpp"

namespace abpower {

inline constexpr const char* kReportSchema = "abpower/1";

// Exit codes of the abpower binary.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitCalibration = 4;

// Planning from historical data: aggregate, fit the metric on the pooled data
// (theta from ybar / wbar), and solve the power spec with the resulting
// variance profile.
nlohmann::json run_plan(const RunConfig& config);
nlohmann::json plan_from_events(const RunConfig& config,
                                std::span<const EventRecord> events);

// Post-experiment estimate of treatment minus control.
nlohmann::json run_analyze(const RunConfig& config);
nlohmann::json analyze_from_events(const RunConfig& config,
                                   std::span<const EventRecord> events);

// Monte Carlo run described by a generator config file. The report's
// "pass" member is false when a calibration band is violated.
nlohmann::json run_simulate(const RunConfig& config);
nlohmann::json simulate_from_file(const RunConfig& config,
                                  SimulationFile file);

// Text form of a report: one `dotted.key=value` line per leaf, values
// printed exactly as in the JSON form.
std::string render_text(const nlohmann::json& report);
std::string render(const nlohmann::json& report, OutputFormat format);

}  // namespace abpower
