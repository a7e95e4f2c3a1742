#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "abpower/aggregation.hpp"

namespace abpower {

// Which CSV columns feed an EventRecord.
struct CsvSchema {
  std::string unit;
  std::string y;
  std::optional<std::string> w;
  std::optional<std::string> arm;
  std::vector<std::string> covariates;
};

// Comma-separated, header on the first line, '.' decimal point, optional
// double quotes around a field. Blank lines are skipped. Without a w column
// every record is left in count mode (w absent).
//
// Throws EmptyInputError for a file without data rows, SchemaError naming a
// missing column, and RowError (with the 1-based line number) for a short
// row, an empty or unparsable cell, or a non-finite number.
std::vector<EventRecord> parse_csv(std::istream& in, const CsvSchema& schema);

// parse_csv on a file; a missing file is a ConfigError.
std::vector<EventRecord> ingest_csv(const std::string& path,
                                    const CsvSchema& schema);

}  // namespace abpower
