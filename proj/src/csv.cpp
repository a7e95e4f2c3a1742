#include "abpower/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string_view>
#include <unordered_map>

#include "abpower/errors.hpp"

namespace abpower {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string> split_fields(std::string_view line,
                                      std::size_t line_no) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"' && trim(current).empty()) {
      quoted = true;
      was_quoted = true;
      current.clear();
    } else if (c == ',') {
      fields.push_back(was_quoted ? current : std::string(trim(current)));
      current.clear();
      was_quoted = false;
    } else {
      current.push_back(c);
    }
  }
  if (quoted) throw RowError(line_no, "unterminated quoted field");
  fields.push_back(was_quoted ? current : std::string(trim(current)));
  return fields;
}

double parse_number(const std::string& cell, const std::string& column,
                    std::size_t line_no) {
  if (cell.empty()) {
    throw RowError(line_no, "empty value in column '" + column + "'");
  }
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw RowError(line_no, "cannot parse '" + cell + "' in column '" +
                                column + "' as a number");
  }
  if (!std::isfinite(value)) {
    throw RowError(line_no, "non-finite value '" + cell + "' in column '" +
                                column + "'");
  }
  return value;
}

}  // namespace

std::vector<EventRecord> parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_fields(line, line_no);
      break;
    }
  }
  if (header.empty()) throw EmptyInputError("input has no header row");
  if (line_no == 1 && header[0].starts_with("\xEF\xBB\xBF")) {
    header[0].erase(0, 3);
  }

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index.emplace(header[i], i);
  auto column = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) {
      throw SchemaError("column '" + name + "' not found in header");
    }
    return it->second;
  };
  const std::size_t unit_col = column(schema.unit);
  const std::size_t y_col = column(schema.y);
  const std::optional<std::size_t> w_col =
      schema.w ? std::optional(column(*schema.w)) : std::nullopt;
  const std::optional<std::size_t> arm_col =
      schema.arm ? std::optional(column(*schema.arm)) : std::nullopt;
  std::vector<std::size_t> cov_cols;
  for (const std::string& c : schema.covariates) cov_cols.push_back(column(c));

  std::vector<EventRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line, line_no);
    if (fields.size() != header.size()) {
      throw RowError(line_no, "expected " + std::to_string(header.size()) +
                                  " fields, found " +
                                  std::to_string(fields.size()));
    }
    EventRecord rec;
    rec.unit_id = fields[unit_col];
    if (rec.unit_id.empty()) {
      throw RowError(line_no, "empty value in column '" + schema.unit + "'");
    }
    rec.y = parse_number(fields[y_col], schema.y, line_no);
    if (w_col) rec.w = parse_number(fields[*w_col], *schema.w, line_no);
    if (arm_col) {
      if (fields[*arm_col].empty()) {
        throw RowError(line_no, "empty value in column '" + *schema.arm + "'");
      }
      rec.arm = fields[*arm_col];
    }
    rec.covariates.reserve(cov_cols.size());
    for (std::size_t j = 0; j < cov_cols.size(); ++j) {
      rec.covariates.push_back(
          parse_number(fields[cov_cols[j]], schema.covariates[j], line_no));
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw EmptyInputError("input has no data rows");
  return records;
}

std::vector<EventRecord> ingest_csv(const std::string& path,
                                    const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open input file '" + path + "'");
  return parse_csv(in, schema);
}

}  // namespace abpower
