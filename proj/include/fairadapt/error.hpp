#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fairadapt {

enum class ErrorCode {
  Cycle,
  Asymmetry,
  Name,
  Resolving,
  Parse,
  MissingValue,
  Level,
  Index,
  Degenerate,
  NotIdentifiable,
  SchemaMismatch,
  ModelMissing,
  EmptyGroup,
  NonNumericOutcome,
  Format,
  Version,
  Io,
  Usage,
};

/// Machine-parsable token for an error code, e.g. "CYCLE".
constexpr std::string_view error_token(ErrorCode code) {
  switch (code) {
    case ErrorCode::Cycle: return "CYCLE";
    case ErrorCode::Asymmetry: return "ASYMMETRY";
    case ErrorCode::Name: return "NAME";
    case ErrorCode::Resolving: return "RESOLVING";
    case ErrorCode::Parse: return "PARSE";
    case ErrorCode::MissingValue: return "MISSING_VALUE";
    case ErrorCode::Level: return "LEVEL";
    case ErrorCode::Index: return "INDEX";
    case ErrorCode::Degenerate: return "DEGENERATE";
    case ErrorCode::NotIdentifiable: return "NOT_IDENTIFIABLE";
    case ErrorCode::SchemaMismatch: return "SCHEMA_MISMATCH";
    case ErrorCode::ModelMissing: return "MODEL_MISSING";
    case ErrorCode::EmptyGroup: return "EMPTY_GROUP";
    case ErrorCode::NonNumericOutcome: return "NON_NUMERIC_OUTCOME";
    case ErrorCode::Format: return "FORMAT";
    case ErrorCode::Version: return "VERSION";
    case ErrorCode::Io: return "IO";
    case ErrorCode::Usage: return "USAGE";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fairadapt
