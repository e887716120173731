// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTNSUM_ERRORS_HPP_
#define ATTNSUM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace attnsum {

enum class ErrorKind {
  kValidation,
  kFormat,
  kTruncation,
  kData,
  kConfig,
  kContract,
  kIo,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kTruncation: return "truncation error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kIo: return "I/O error";
  }
  return "error";
}

/// Every failure raised by the library carries one of the kinds above so the
/// CLI can map it onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind),
        message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace attnsum

#endif  // ATTNSUM_ERRORS_HPP_
