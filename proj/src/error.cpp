#include "uqvae/error.hpp"

namespace uqvae {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NonPositiveSpectrum: return "NonPositiveSpectrum";
    case ErrorKind::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorKind::TapeMismatch: return "TapeMismatch";
    case ErrorKind::DegenerateSpread: return "DegenerateSpread";
    case ErrorKind::ZeroSignal: return "ZeroSignal";
    case ErrorKind::ZeroReference: return "ZeroReference";
    case ErrorKind::ForwardFailure: return "ForwardFailure";
    case ErrorKind::SolverFailure: return "SolverFailure";
    case ErrorKind::SingularC: return "SingularC";
    case ErrorKind::SingularGamma: return "SingularGamma";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::IntegratorBlowup: return "IntegratorBlowup";
    case ErrorKind::EmptyTrajectory: return "EmptyTrajectory";
    case ErrorKind::DimensionUnsupported: return "DimensionUnsupported";
    case ErrorKind::BoundaryPoint: return "BoundaryPoint";
    case ErrorKind::DegenerateWeights: return "DegenerateWeights";
    case ErrorKind::TooManyFailures: return "TooManyFailures";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

bool is_config_error(ErrorKind kind) noexcept {
  return kind == ErrorKind::ConfigError || kind == ErrorKind::MissingArtifact ||
         kind == ErrorKind::DimensionMismatch;
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace uqvae
