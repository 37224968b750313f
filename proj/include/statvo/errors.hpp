#pragma once

#include <stdexcept>
#include <string>

namespace statvo {

// Base class for every error raised by the engine; catch this at the CLI
// boundary to turn failures into exit codes.
struct EngineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DepthInvalid : EngineError {
  DepthInvalid() : EngineError("keypoint depth is missing or non-positive") {}
};

struct BehindCamera : EngineError {
  BehindCamera() : EngineError("point is behind the camera (z <= 0)") {}
};

struct DegenerateTranslation : EngineError {
  DegenerateTranslation() : EngineError("fundamental matrix undefined for zero translation") {}
};

struct InvalidResidual : EngineError {
  InvalidResidual() : EngineError("squared residual must be non-negative") {}
};

struct InsufficientCorrespondences : EngineError {
  InsufficientCorrespondences() : EngineError("fewer than 8 correspondences for fundamental estimation") {}
};

struct NoConsensus : EngineError {
  NoConsensus() : EngineError("RANSAC consensus set smaller than 8") {}
};

struct PoseUnderconstrained : EngineError {
  PoseUnderconstrained() : EngineError("fewer than 6 positively weighted observations") {}
};

struct EvalUnderconstrained : EngineError {
  EvalUnderconstrained() : EngineError("fewer than 2 timestamp-matched pose pairs") {}
};

struct ConfigError : EngineError {
  using EngineError::EngineError;
};

struct LoadError : EngineError {
  using EngineError::EngineError;
};

}  // namespace statvo
