#pragma once

#include <stdexcept>
#include <string>

namespace vtac {

enum class ErrorCode {
  MalformedHeader,
  UnsupportedFormat,
  TruncatedData,
  ChecksumMismatch,
  WindowOutOfBounds,
  ValueOutOfRange,
  EmptyInput,
  DimensionMismatch,
  TooFewSamples,
  TooShort,
  LengthMismatch,
  NotEnoughNeighbors,
  MinorityTooSmall,
  SingleClass,
  ShapeMismatch,
  BatchTooSmall,
  DimensionNotDivisible,
  LabelOutOfRange,
  InvalidHyperparams,
  DivergedLoss,
  CorruptCheckpoint,
  VersionMismatch,
  ArchitectureMismatch,
  ScoreOutOfRange,
  InvalidConfig,
  MissingInput,
  ConfigError,
  IoError,
  MalformedCsv,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::WindowOutOfBounds: return "WindowOutOfBounds";
    case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NotEnoughNeighbors: return "NotEnoughNeighbors";
    case ErrorCode::MinorityTooSmall: return "MinorityTooSmall";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::DimensionNotDivisible: return "DimensionNotDivisible";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::InvalidHyperparams: return "InvalidHyperparams";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ArchitectureMismatch: return "ArchitectureMismatch";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
  }
  return "Unknown";
}

/// Library-wide exception. Every failure the pipeline reports carries a code
/// so callers (and the CLI) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace vtac
