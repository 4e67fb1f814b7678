#pragma once

#include <stdexcept>
#include <string>

namespace limetree {

enum class ErrorCode {
  invalid_argument,
  unsupported_instance,
  capacity,
  transport,
  protocol,
  degenerate_fit,
  conflict,
  not_found,
};

const char* to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library. The code lets the
/// service layer map failures onto HTTP statuses without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Remote black box could not be reached. Carries enough metadata for a caller
/// to decide whether to retry.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, int attempts, int http_status, bool retryable)
      : Error(ErrorCode::transport, message),
        attempts_(attempts),
        http_status_(http_status),
        retryable_(retryable) {}

  int attempts() const noexcept { return attempts_; }
  /// 0 when no HTTP response was received at all.
  int http_status() const noexcept { return http_status_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  int attempts_;
  int http_status_;
  bool retryable_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::invalid_argument, message);
}

}  // namespace limetree
