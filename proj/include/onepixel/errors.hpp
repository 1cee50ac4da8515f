#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace onepixel {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values (population too small, bad bounds, malformed
// oracle spec, ...). Surfaced as exit code 2 by the CLI.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed PNG input. Carries how far into the byte stream decoding got.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

enum class OracleErrorKind {
  Timeout,
  ConnectionFailed,
  HttpStatus,       // non-2xx response
  UnparsableBody,   // response body is not valid JSON
  MissingField,     // field_path does not resolve
  NonNumericScore,  // field_path resolves to a non-number
  ScoreOutOfRange,  // score outside [0, 1]
  PurityViolation,  // same image scored differently (cache verify mode)
};

// Classifier-oracle failures. Each failure mode is a distinct kind; transport
// kinds (Timeout, ConnectionFailed) and 5xx statuses are retryable, parse
// kinds are not.
class OracleError : public Error {
 public:
  OracleError(OracleErrorKind kind, const std::string& what, int http_status = 0)
      : Error(what), kind_(kind), http_status_(http_status) {}

  OracleErrorKind kind() const { return kind_; }
  int http_status() const { return http_status_; }

  bool retryable() const {
    switch (kind_) {
      case OracleErrorKind::Timeout:
      case OracleErrorKind::ConnectionFailed:
        return true;
      case OracleErrorKind::HttpStatus:
        return http_status_ >= 500;
      default:
        return false;
    }
  }

 private:
  OracleErrorKind kind_;
  int http_status_;
};

// CSV schema or row-level parse failure; row is 1-based (header = row 1).
class CsvError : public Error {
 public:
  CsvError(const std::string& what, std::size_t row)
      : Error(what + " (row " + std::to_string(row) + ")"), row_(row) {}

  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

}  // namespace onepixel
