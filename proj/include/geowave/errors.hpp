#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geowave {

/// Failure classes raised across the library. The CLI maps each class to a
/// distinct process exit code.
enum class ErrorCode {
  InvalidArgument,
  PointOffManifold,
  VectorNotTangent,
  OutsideTubularNeighborhood,
  IntervalOutsideGrid,
  HorizonExceeded,
  UnsupportedOrder,
  EmptyMeasure,
  NonpositiveDt,
  DimensionMismatch,
  QuadratureNotConverged,
  NonLatticeTime,
  InsufficientPadding,
  ConeExhausted,
  OffManifoldInitialData,
  BlowupDetected,
  MissingIncrementLog,
  OptimizerDiverged,
  InsufficientTrials,
  AllZeroCounts,
  ConfigInvalid,
  Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PointOffManifold: return "PointOffManifold";
    case ErrorCode::VectorNotTangent: return "VectorNotTangent";
    case ErrorCode::OutsideTubularNeighborhood: return "OutsideTubularNeighborhood";
    case ErrorCode::IntervalOutsideGrid: return "IntervalOutsideGrid";
    case ErrorCode::HorizonExceeded: return "HorizonExceeded";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::EmptyMeasure: return "EmptyMeasure";
    case ErrorCode::NonpositiveDt: return "NonpositiveDt";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorCode::NonLatticeTime: return "NonLatticeTime";
    case ErrorCode::InsufficientPadding: return "InsufficientPadding";
    case ErrorCode::ConeExhausted: return "ConeExhausted";
    case ErrorCode::OffManifoldInitialData: return "OffManifoldInitialData";
    case ErrorCode::BlowupDetected: return "BlowupDetected";
    case ErrorCode::MissingIncrementLog: return "MissingIncrementLog";
    case ErrorCode::OptimizerDiverged: return "OptimizerDiverged";
    case ErrorCode::InsufficientTrials: return "InsufficientTrials";
    case ErrorCode::AllZeroCounts: return "AllZeroCounts";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace geowave
