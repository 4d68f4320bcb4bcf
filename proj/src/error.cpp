#include "flowgeom/error.hpp"

namespace flowgeom {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::WeightOutOfRange: return "WeightOutOfRange";
    case ErrorCode::ConfidenceOutOfRange: return "ConfidenceOutOfRange";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::AllZeroPoints: return "AllZeroPoints";
    case ErrorCode::InsufficientSupport: return "InsufficientSupport";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::InvalidProjection: return "InvalidProjection";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::DegenerateAnchor: return "DegenerateAnchor";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::DegenerateSet: return "DegenerateSet";
    case ErrorCode::IdentityMismatch: return "IdentityMismatch";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidTransform: return "InvalidTransform";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateGeometry:
    case ErrorCode::AllZeroPoints:
    case ErrorCode::InsufficientSupport:
    case ErrorCode::DegenerateConfiguration:
    case ErrorCode::DegenerateAnchor:
    case ErrorCode::DegenerateSet:
    case ErrorCode::EmptyIntersection:
    case ErrorCode::InvalidProjection:
      return true;
    default:
      return false;
  }
}

}  // namespace flowgeom
