#include "sp360/error.hpp"

namespace sp360 {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingModelFile: return "MissingModelFile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InconsistentModel: return "InconsistentModel";
    case ErrorCode::UnsupportedCameraModel: return "UnsupportedCameraModel";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::CorruptRaster: return "CorruptRaster";
    case ErrorCode::InvalidStride: return "InvalidStride";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidRotation: return "InvalidRotation";
    case ErrorCode::DuplicateView: return "DuplicateView";
    case ErrorCode::RankOutOfRange: return "RankOutOfRange";
    case ErrorCode::NoRegistrableSubset: return "NoRegistrableSubset";
    case ErrorCode::InvalidQuaternion: return "InvalidQuaternion";
    case ErrorCode::InsufficientControlPoints: return "InsufficientControlPoints";
    case ErrorCode::IntrinsicsMismatch: return "IntrinsicsMismatch";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::InvalidThreshold: return "InvalidThreshold";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::InitializationError: return "InitializationError";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::InvalidEta: return "InvalidEta";
    case ErrorCode::PoolExhausted: return "PoolExhausted";
    case ErrorCode::EnhancerUnavailable: return "EnhancerUnavailable";
    case ErrorCode::ProtocolViolation: return "ProtocolViolation";
    case ErrorCode::EmptyInstructionPool: return "EmptyInstructionPool";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

ParseError::ParseError(std::string file, int line, const std::string& message)
    : Error(ErrorCode::ParseError, file + ":" + std::to_string(line) + ": " + message),
      file_(std::move(file)),
      line_(line) {}

}  // namespace sp360
