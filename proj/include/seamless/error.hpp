#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace seamless {

enum class ErrorCode {
  SchemaMismatch,
  DegenerateColumn,
  DimensionMismatch,
  InsufficientSample,
  InvalidAlpha,
  InvalidWeight,
  InvalidCounts,
  InvalidParams,
  EmptyDose,
  InsufficientCandidates,
  PhaseViolation,
  ArityMismatch,
  UnknownCase,
  NoValidReplicates,
  ConfigError,
  IoError,
  NotFound,
};

/// Stable machine-readable name, used in JSON error bodies and CLI output.
constexpr std::string_view code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::SchemaMismatch: return "SCHEMA_MISMATCH";
    case ErrorCode::DegenerateColumn: return "DEGENERATE_COLUMN";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::InsufficientSample: return "INSUFFICIENT_SAMPLE";
    case ErrorCode::InvalidAlpha: return "INVALID_ALPHA";
    case ErrorCode::InvalidWeight: return "INVALID_WEIGHT";
    case ErrorCode::InvalidCounts: return "INVALID_COUNTS";
    case ErrorCode::InvalidParams: return "INVALID_PARAMS";
    case ErrorCode::EmptyDose: return "EMPTY_DOSE";
    case ErrorCode::InsufficientCandidates: return "INSUFFICIENT_CANDIDATES";
    case ErrorCode::PhaseViolation: return "PHASE_VIOLATION";
    case ErrorCode::ArityMismatch: return "ARITY_MISMATCH";
    case ErrorCode::UnknownCase: return "UNKNOWN_CASE";
    case ErrorCode::NoValidReplicates: return "NO_VALID_REPLICATES";
    case ErrorCode::ConfigError: return "CONFIG_ERROR";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::NotFound: return "NOT_FOUND";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace seamless
