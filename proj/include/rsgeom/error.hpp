#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rsgeom {

enum class ErrorCode {
  NonPositiveDepth,
  DegenerateAcceleration,
  InterpolationSingularity,
  DimensionMismatch,
  WrongTargetScanline,
  InvalidArgument,
  PlaneBehindCamera,
  RankDeficient,
  InsufficientData,
  NoConsensus,
  EmptySearchRange,
  EmptyMask,
  BadMagic,
  TruncatedFile,
  UnsupportedVariant,
  DecodeError,
  IoError,
  ConfigError,
  MissingReference,
  MismatchedFrameSets,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::DegenerateAcceleration: return "DegenerateAcceleration";
    case ErrorCode::InterpolationSingularity: return "InterpolationSingularity";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::WrongTargetScanline: return "WrongTargetScanline";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PlaneBehindCamera: return "PlaneBehindCamera";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::EmptySearchRange: return "EmptySearchRange";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::UnsupportedVariant: return "UnsupportedVariant";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MissingReference: return "MissingReference";
    case ErrorCode::MismatchedFrameSets: return "MismatchedFrameSets";
  }
  return "Unknown";
}

/// Exception thrown by every rsgeom operation that fails as a whole.
/// Per-pixel degeneracies never throw; they clear validity masks instead.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// IO, decode and config failures map to CLI exit code 2, everything else to 1.
  bool is_io() const noexcept {
    switch (code_) {
      case ErrorCode::BadMagic:
      case ErrorCode::TruncatedFile:
      case ErrorCode::UnsupportedVariant:
      case ErrorCode::DecodeError:
      case ErrorCode::IoError:
      case ErrorCode::ConfigError:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace rsgeom
