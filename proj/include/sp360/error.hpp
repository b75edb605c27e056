#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sp360 {

enum class ErrorCode {
  // scene-io
  MissingModelFile,
  ParseError,
  InconsistentModel,
  UnsupportedCameraModel,
  FormatError,
  CorruptRaster,
  InvalidStride,
  IoError,
  // se3-camera
  InvalidRotation,
  DuplicateView,
  RankOutOfRange,
  NoRegistrableSubset,
  InvalidQuaternion,
  InsufficientControlPoints,
  IntrinsicsMismatch,
  // rendering and optimization
  ShapeError,
  InvalidThreshold,
  EmptyCloud,
  InitializationError,
  // loop
  BudgetTooSmall,
  InvalidEta,
  PoolExhausted,
  EnhancerUnavailable,
  ProtocolViolation,
  EmptyInstructionPool,
  // configuration
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

/// Every module reports failure by throwing this type. The code is stable and
/// meant for programmatic handling; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Thrown for malformed text input; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::string file, int line, const std::string& message);

  const std::string& file() const noexcept { return file_; }
  int line() const noexcept { return line_; }

 private:
  std::string file_;
  int line_;
};

}  // namespace sp360
