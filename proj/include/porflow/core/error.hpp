#pragma once

#include <stdexcept>
#include <string>

namespace porflow {

enum class ErrorKind {
  InvalidArgument,
  NonPhysicalFvf,
  InvalidWellGeometry,
  DimensionMismatch,
  NonConvergence,
  SingularJacobian,
  OutOfRangeControl,
  ShapeMismatch,
  DivergedTraining,
  MissingObservation,
  MissingCheckpoint,
  SpecHashMismatch,
  CorruptCheckpoint,
  VersionMismatch,
  DegenerateReference,
  DivisionByZeroPixel,
  ParseError,
  ValidationError,
  IoError,
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace porflow
