#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chanhomog {

enum class ErrorCode {
  DisconnectedChannel,
  EmptyTopBottomFace,
  ChannelTouchesCellWall,
  OffGridCorner,
  InvalidRect,
  NonConformingResolution,
  PointOutsideChannel,
  DiffusionBelowBound,
  GammaOutOfRange,
  InvalidTimeConfig,
  LinearSolveDiverged,
  IncommensurateGrids,
  ExpressionSyntax,
  InvalidConfig,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DisconnectedChannel: return "DisconnectedChannel";
    case ErrorCode::EmptyTopBottomFace: return "EmptyTopBottomFace";
    case ErrorCode::ChannelTouchesCellWall: return "ChannelTouchesCellWall";
    case ErrorCode::OffGridCorner: return "OffGridCorner";
    case ErrorCode::InvalidRect: return "InvalidRect";
    case ErrorCode::NonConformingResolution: return "NonConformingResolution";
    case ErrorCode::PointOutsideChannel: return "PointOutsideChannel";
    case ErrorCode::DiffusionBelowBound: return "DiffusionBelowBound";
    case ErrorCode::GammaOutOfRange: return "GammaOutOfRange";
    case ErrorCode::InvalidTimeConfig: return "InvalidTimeConfig";
    case ErrorCode::LinearSolveDiverged: return "LinearSolveDiverged";
    case ErrorCode::IncommensurateGrids: return "IncommensurateGrids";
    case ErrorCode::ExpressionSyntax: return "ExpressionSyntax";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace chanhomog
