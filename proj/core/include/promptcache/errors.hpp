#pragma once

#include <stdexcept>
#include <string>

namespace pc {

enum class ErrorCode {
  SyntaxError,
  MissingSchemaAttr,
  UnknownRole,
  TokenizerFailure,
  FreeTextOverflow,
  ArgTooLong,
  InvalidConfig,
  PositionOutOfRange,
  ShapeMismatch,
  UnknownModule,
  CapacityExceeded,
  IoError,
  VersionMismatch,
  ConfigHashMismatch,
  ValidationFailed,
  PositionOverlap,
  UnknownCall,
  RecursionDetected,
  DuplicateName,
  InvalidProgram,
  Internal,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::MissingSchemaAttr: return "MissingSchemaAttr";
    case ErrorCode::UnknownRole: return "UnknownRole";
    case ErrorCode::TokenizerFailure: return "TokenizerFailure";
    case ErrorCode::FreeTextOverflow: return "FREE_TEXT_OVERFLOW";
    case ErrorCode::ArgTooLong: return "ARG_TOO_LONG";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::PositionOutOfRange: return "PositionOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnknownModule: return "UnknownModule";
    case ErrorCode::CapacityExceeded: return "CapacityExceeded";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ConfigHashMismatch: return "ConfigHashMismatch";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::PositionOverlap: return "PositionOverlap";
    case ErrorCode::UnknownCall: return "UnknownCall";
    case ErrorCode::RecursionDetected: return "RecursionDetected";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::InvalidProgram: return "InvalidProgram";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code plus an optional source location
/// (1-based line/col; 0 means "not applicable").
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, int line = 0, int col = 0)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code), line_(line), col_(col) {}

  ErrorCode code() const { return code_; }
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  ErrorCode code_;
  int line_;
  int col_;
};

}  // namespace pc
