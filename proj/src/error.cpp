#include "gridosc/error.hpp"

namespace gridosc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorKind::NotHurwitz: return "NotHurwitz";
    case ErrorKind::SingularPencil: return "SingularPencil";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::SingularAtFrequency: return "SingularAtFrequency";
    case ErrorKind::InvalidLaplacian: return "InvalidLaplacian";
    case ErrorKind::MissingFrequencyState: return "MissingFrequencyState";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::BadDimensions: return "BadDimensions";
    case ErrorKind::SymmetryViolated: return "SymmetryViolated";
    case ErrorKind::NotRelativeGain: return "NotRelativeGain";
    case ErrorKind::RiccatiFailure: return "RiccatiFailure";
    case ErrorKind::NotStabilizable: return "NotStabilizable";
    case ErrorKind::StabilizationLost: return "StabilizationLost";
    case ErrorKind::StructureNotStabilizing: return "StructureNotStabilizing";
    case ErrorKind::IncompatibleGain: return "IncompatibleGain";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace gridosc
