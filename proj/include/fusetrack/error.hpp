#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fusetrack {

enum class ErrorCode {
  // core
  Empty,
  NonMonotoneTime,
  MixedFrames,
  ContractViolation,
  // gp
  SingularKernel,
  // ekf
  OriginSingularity,
  SingularInnovation,
  OutOfOrder,
  NumericalFailure,
  // align
  NoOverlap,
  InsufficientSupport,
  // similarity
  SingularCovariance,
  LengthMismatch,
  // assoc
  SingularSigma,
  InsufficientSamples,
  // sim
  OutOfGrid,
  // stereo
  ZeroDisparity,
  // ingestion
  SchemaError,
  CountMismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable code. Every module reports failures
/// through this type so the CLI can map them onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fusetrack
