#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace drift {

enum class ErrorKind {
  OutOfRange,
  InvalidOverlap,
  InvalidArgument,
  IndexOutOfRange,
  EmptyMask,
  EmptyQuery,
  WidthMismatch,
  MissingEvidence,
  MissingAnswer,
  EmptyRange,
  ParseError,
  ClientError,
  JudgeUnparseable,
  InsufficientData,
  LengthMismatch,
  ContextOverflow,
  EmptyInput,
  ConfigError,
  IoError,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::InvalidOverlap: return "InvalidOverlap";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::EmptyQuery: return "EmptyQuery";
    case ErrorKind::WidthMismatch: return "WidthMismatch";
    case ErrorKind::MissingEvidence: return "MissingEvidence";
    case ErrorKind::MissingAnswer: return "MissingAnswer";
    case ErrorKind::EmptyRange: return "EmptyRange";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ClientError: return "ClientError";
    case ErrorKind::JudgeUnparseable: return "JudgeUnparseable";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ContextOverflow: return "ContextOverflow";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; `kind()` carries the category that
/// callers (and the CLI's exit-code mapping) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The text without the category prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace drift
