#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flowgeom {

enum class ErrorCode {
  ShapeMismatch,
  WeightOutOfRange,
  ConfidenceOutOfRange,
  NonFiniteValue,
  DegenerateGeometry,
  AllZeroPoints,
  InsufficientSupport,
  DegenerateConfiguration,
  EmptyMask,
  InvalidProjection,
  ConfigInvalid,
  DegenerateAnchor,
  Unsupported,
  DegenerateSet,
  IdentityMismatch,
  EmptyIntersection,
  CorruptFile,
  IoError,
  InvalidTransform,
};

std::string_view to_string(ErrorCode code);

// Every library failure carries a code; what() is "<CodeName>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// True for the codes that describe numerical degeneracy of the input data.
bool is_numerical(ErrorCode code);

}  // namespace flowgeom
