#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridosc {

enum class ErrorKind {
  DimensionMismatch,
  NonFiniteEntry,
  NotHurwitz,
  SingularPencil,
  ConvergenceFailure,
  SingularAtFrequency,
  InvalidLaplacian,
  MissingFrequencyState,
  SchemaViolation,
  BadDimensions,
  SymmetryViolated,
  NotRelativeGain,
  RiccatiFailure,
  NotStabilizable,
  StabilizationLost,
  StructureNotStabilizing,
  IncompatibleGain,
  Io,
  Config,
};

std::string_view to_string(ErrorKind kind);

// Every library failure is reported through this type; `kind()` is stable and
// is what the CLI serializes into its error JSON.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace gridosc
