#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eat {

/// Failure categories. Each maps to a distinct process exit code in the CLI.
enum class ErrorKind {
  numeric_domain,    // NaN/Inf or underflow where a finite value is required
  oracle_failure,    // finite-difference probe evaluated non-finite
  config,            // invalid configuration or hyperparameter
  contract,          // caller violated an operation precondition
  parse,             // malformed input file
  undefined_metric,  // metric has no defined value for the given records
  training_failure,  // loss diverged during optimisation
  io,                // missing or unwritable file
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class NumericDomainError : public Error {
 public:
  explicit NumericDomainError(const std::string& message)
      : Error(ErrorKind::numeric_domain, message) {}
};

class OracleFailure : public Error {
 public:
  OracleFailure(const std::string& message, std::size_t probe_index)
      : Error(ErrorKind::oracle_failure, message), probe_index_(probe_index) {}

  std::size_t probe_index() const noexcept { return probe_index_; }

 private:
  std::size_t probe_index_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(ErrorKind::config, message) {}
};

class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& message)
      : Error(ErrorKind::contract, message) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UndefinedMetric : public Error {
 public:
  explicit UndefinedMetric(const std::string& message)
      : Error(ErrorKind::undefined_metric, message) {}
};

class TrainingFailure : public Error {
 public:
  TrainingFailure(const std::string& message, std::size_t epoch, std::size_t step)
      : Error(ErrorKind::training_failure, message + " (epoch " + std::to_string(epoch) +
                                               ", step " + std::to_string(step) + ")"),
        epoch_(epoch),
        step_(step) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t epoch_;
  std::size_t step_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

}  // namespace eat
