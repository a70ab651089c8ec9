#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uqvae {

enum class ErrorKind {
  DimensionMismatch,
  NotPositiveDefinite,
  NoConvergence,
  NonPositiveSpectrum,
  NonFiniteActivation,
  TapeMismatch,
  DegenerateSpread,
  ZeroSignal,
  ZeroReference,
  ForwardFailure,
  SolverFailure,
  SingularC,
  SingularGamma,
  DivergenceDetected,
  InsufficientSamples,
  NonFiniteState,
  IntegratorBlowup,
  EmptyTrajectory,
  DimensionUnsupported,
  BoundaryPoint,
  DegenerateWeights,
  TooManyFailures,
  ConfigError,
  MissingArtifact,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Numerical failures map to CLI exit code 3, configuration and I/O problems to 2.
bool is_config_error(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::DimensionMismatch, what);
}

}  // namespace uqvae
