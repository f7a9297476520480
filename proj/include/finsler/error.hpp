#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace finsler {

/// Every failure mode the library reports. The CLI maps these onto exit codes.
enum class ErrorKind {
  ZeroDirection,
  NonConvex,
  DegenerateMetric,
  FormulaMismatch,
  DerivativeUnavailable,
  UnsupportedLift,
  UnsupportedOrder,
  DirectionJetsUnavailable,
  NonPositiveFactor,
  ModeMismatch,
  MeshTooCoarse,
  RequestRejected,
  MeshMismatch,
  StencilOverflow,
  ConvergenceFailure,
  ConstantField,
  RankDeficiency,
  NonConstantScalarCurvature,
  GreenUnavailable,
  EmptyFamily,
  InvalidEpsilon,
  EpsilonOutOfRange,
  ParseError,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace finsler
