#pragma once

#include <stdexcept>
#include <string>

namespace abpower {

// Errors are split into two families so the CLI can map them onto distinct
// exit codes: problems with what the user asked for (ConfigError) and
// problems with the data it was asked about (DataError).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation (p outside (0,1),
// non-finite z, psi outside (0,1), mde <= 0, ...).
class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Power spec with zero or more than one unknown.
class SpecError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Missing CSV column, mixed covariate arity, missing w in sum mode.
class SchemaError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyInputError : public DataError {
 public:
  using DataError::DataError;
};

class UndefinedSkewnessError : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateDenominatorError : public DataError {
 public:
  using DataError::DataError;
};

class InconsistentAssignmentError : public DataError {
 public:
  using DataError::DataError;
};

class IncompatibleArmsError : public DataError {
 public:
  using DataError::DataError;
};

// Wrong number of arm levels for an A/B comparison.
class DesignError : public DataError {
 public:
  using DataError::DataError;
};

// Unparsable or non-finite CSV cell; the message carries the line number.
class RowError : public DataError {
 public:
  RowError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class CollinearityError : public DataError {
 public:
  // `column` is the zero-based covariate index; the intercept is not counted.
  CollinearityError(std::size_t column, const std::string& what)
      : DataError(what), column_(column) {}
  std::size_t column() const { return column_; }

 private:
  std::size_t column_;
};

// Monte Carlo harness saw too many failed replications.
class HarnessError : public Error {
 public:
  using Error::Error;
};

}  // namespace abpower
