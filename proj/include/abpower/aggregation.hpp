#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace abpower {

// One observation-level row: an order, a session, a delivery.
struct EventRecord {
  std::string unit_id;
  std::optional<std::string> arm;
  double y = 0.0;
  // Absent means the row carries no denominator value (count mode).
  std::optional<double> w;
  std::vector<double> covariates;
};

// One unit of experimental assignment after summing its events.
struct ClusterRow {
  std::string unit_id;
  std::optional<std::string> arm;
  double y = 0.0;
  double w = 0.0;
  std::vector<double> x;
  std::size_t n_events = 0;
};

enum class WeightMode { kSum, kCount };
enum class CovariateMode { kSum, kMean, kFirst };

std::string_view to_string(WeightMode mode);
std::string_view to_string(CovariateMode mode);
WeightMode parse_weight_mode(std::string_view text);
CovariateMode parse_covariate_mode(std::string_view text);

// Collapses events into one row per unit_id, sorted by unit_id.
//
// Within a unit, values are accumulated in a canonical (sorted) order so the
// output is bit-identical under any permutation of the input; kFirst is the
// exception and takes covariates from the first event in input order.
//
// Throws EmptyInputError for no events, SchemaError for mixed covariate arity
// or a missing w in kSum mode, InconsistentAssignmentError when one unit
// carries two different arm labels (or a label on only some of its events),
// and DataError for non-finite values.
std::vector<ClusterRow> aggregate(std::span<const EventRecord> events,
                                  WeightMode w_mode, CovariateMode cov_mode);

}  // namespace abpower
