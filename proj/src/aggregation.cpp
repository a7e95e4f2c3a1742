#include "abpower/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "abpower/errors.hpp"

namespace abpower {
namespace {

bool all_finite(const EventRecord& e) {
  if (!std::isfinite(e.y)) return false;
  if (e.w && !std::isfinite(*e.w)) return false;
  return std::all_of(e.covariates.begin(), e.covariates.end(),
                     [](double v) { return std::isfinite(v); });
}

// Strict weak order on event values, used to fix the summation order.
bool value_less(const EventRecord* a, const EventRecord* b) {
  if (a->y != b->y) return a->y < b->y;
  const double aw = a->w.value_or(0.0);
  const double bw = b->w.value_or(0.0);
  if (aw != bw) return aw < bw;
  return a->covariates < b->covariates;
}

}  // namespace

std::string_view to_string(WeightMode mode) {
  return mode == WeightMode::kSum ? "sum" : "count";
}

std::string_view to_string(CovariateMode mode) {
  switch (mode) {
    case CovariateMode::kSum:
      return "sum";
    case CovariateMode::kMean:
      return "mean";
    case CovariateMode::kFirst:
      return "first";
  }
  return "?";
}

WeightMode parse_weight_mode(std::string_view text) {
  if (text == "sum") return WeightMode::kSum;
  if (text == "count") return WeightMode::kCount;
  throw ConfigError("w-mode must be 'sum' or 'count', got '" +
                    std::string(text) + "'");
}

CovariateMode parse_covariate_mode(std::string_view text) {
  if (text == "sum") return CovariateMode::kSum;
  if (text == "mean") return CovariateMode::kMean;
  if (text == "first") return CovariateMode::kFirst;
  throw ConfigError("cov-mode must be 'sum', 'mean' or 'first', got '" +
                    std::string(text) + "'");
}

std::vector<ClusterRow> aggregate(std::span<const EventRecord> events,
                                  WeightMode w_mode, CovariateMode cov_mode) {
  if (events.empty()) throw EmptyInputError("no events to aggregate");

  const std::size_t arity = events.front().covariates.size();
  std::map<std::string_view, std::vector<const EventRecord*>> units;
  for (const EventRecord& e : events) {
    if (e.covariates.size() != arity) {
      throw SchemaError("unit '" + e.unit_id + "' has " +
                        std::to_string(e.covariates.size()) +
                        " covariates, expected " + std::to_string(arity));
    }
    if (!all_finite(e)) {
      throw DataError("non-finite value in unit '" + e.unit_id + "'");
    }
    if (w_mode == WeightMode::kSum && !e.w) {
      throw SchemaError("w-mode sum needs a w value for every event (unit '" +
                        e.unit_id + "')");
    }
    units[e.unit_id].push_back(&e);
  }

  std::vector<ClusterRow> rows;
  rows.reserve(units.size());
  for (auto& [id, members] : units) {
    ClusterRow row;
    row.unit_id = std::string(id);
    row.arm = members.front()->arm;
    for (const EventRecord* e : members) {
      if (e->arm != row.arm) {
        throw InconsistentAssignmentError("unit '" + row.unit_id +
                                          "' appears in more than one arm");
      }
    }
    row.n_events = members.size();

    if (cov_mode == CovariateMode::kFirst) {
      row.x = members.front()->covariates;
    }
    std::vector<const EventRecord*> ordered = members;
    std::sort(ordered.begin(), ordered.end(), value_less);

    double w_sum = 0.0;
    std::vector<double> x_sum(arity, 0.0);
    for (const EventRecord* e : ordered) {
      row.y += e->y;
      if (w_mode == WeightMode::kSum) w_sum += *e->w;
      for (std::size_t j = 0; j < arity; ++j) x_sum[j] += e->covariates[j];
    }
    row.w = w_mode == WeightMode::kSum ? w_sum
                                       : static_cast<double>(row.n_events);
    if (cov_mode == CovariateMode::kSum) {
      row.x = std::move(x_sum);
    } else if (cov_mode == CovariateMode::kMean) {
      for (double& v : x_sum) v /= static_cast<double>(row.n_events);
      row.x = std::move(x_sum);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace abpower
