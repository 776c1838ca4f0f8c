#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace distill {

/// Input or record failed a contract check.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  explicit ValidationError(const std::string& what)
      : ValidationError("invalid", what) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class DuplicateIdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A malformed line in a line-oriented input file.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Retries exhausted on transient failures (timeouts, 429, 5xx).
class TransportError : public std::runtime_error {
 public:
  TransportError(int last_status, int attempts, const std::string& what)
      : std::runtime_error(what), last_status_(last_status), attempts_(attempts) {}

  /// 0 when the last attempt never produced an HTTP status.
  int last_status() const noexcept { return last_status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int last_status_;
  int attempts_;
};

/// Non-retryable 4xx response.
class PermanentError : public std::runtime_error {
 public:
  PermanentError(int status, const std::string& what)
      : std::runtime_error(what), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

class EmptyResponseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Teacher reply contained no usable <example> blocks.
class BatchParseError : public std::runtime_error {
 public:
  BatchParseError(const std::string& what, std::string raw)
      : std::runtime_error(what), raw_(std::move(raw)) {}

  const std::string& raw_response() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace distill
