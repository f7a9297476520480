#include "finsler/error.hpp"
#include "finsler/numeric_policy.hpp"

namespace finsler {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroDirection: return "ZeroDirection";
    case ErrorKind::NonConvex: return "NonConvex";
    case ErrorKind::DegenerateMetric: return "DegenerateMetric";
    case ErrorKind::FormulaMismatch: return "FormulaMismatch";
    case ErrorKind::DerivativeUnavailable: return "DerivativeUnavailable";
    case ErrorKind::UnsupportedLift: return "UnsupportedLift";
    case ErrorKind::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorKind::DirectionJetsUnavailable: return "DirectionJetsUnavailable";
    case ErrorKind::NonPositiveFactor: return "NonPositiveFactor";
    case ErrorKind::ModeMismatch: return "ModeMismatch";
    case ErrorKind::MeshTooCoarse: return "MeshTooCoarse";
    case ErrorKind::RequestRejected: return "RequestRejected";
    case ErrorKind::MeshMismatch: return "MeshMismatch";
    case ErrorKind::StencilOverflow: return "StencilOverflow";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::ConstantField: return "ConstantField";
    case ErrorKind::RankDeficiency: return "RankDeficiency";
    case ErrorKind::NonConstantScalarCurvature: return "NonConstantScalarCurvature";
    case ErrorKind::GreenUnavailable: return "GreenUnavailable";
    case ErrorKind::EmptyFamily: return "EmptyFamily";
    case ErrorKind::InvalidEpsilon: return "InvalidEpsilon";
    case ErrorKind::EpsilonOutOfRange: return "EpsilonOutOfRange";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

const NumericPolicy& default_policy() {
  static const NumericPolicy policy{};
  return policy;
}

}  // namespace finsler
