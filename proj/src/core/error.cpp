#include "porflow/core/error.hpp"

namespace porflow {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NonPhysicalFvf: return "NonPhysicalFvf";
    case ErrorKind::InvalidWellGeometry: return "InvalidWellGeometry";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::OutOfRangeControl: return "OutOfRangeControl";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DivergedTraining: return "DivergedTraining";
    case ErrorKind::MissingObservation: return "MissingObservation";
    case ErrorKind::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorKind::SpecHashMismatch: return "SpecHashMismatch";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::DegenerateReference: return "DegenerateReference";
    case ErrorKind::DivisionByZeroPixel: return "DivisionByZeroPixel";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace porflow
