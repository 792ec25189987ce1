#include "geosafety/error.hpp"

namespace geosafety {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ProjectionRange: return "ProjectionRange";
    case ErrorKind::MalformedXml: return "MalformedXml";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::RadiusExceedsIndex: return "RadiusExceedsIndex";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::RangeError: return "RangeError";
    case ErrorKind::DuplicateResponse: return "DuplicateResponse";
    case ErrorKind::UnknownId: return "UnknownId";
    case ErrorKind::MissingFeatures: return "MissingFeatures";
    case ErrorKind::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::TooManyDegenerateResamples: return "TooManyDegenerateResamples";
    case ErrorKind::TooFewSchools: return "TooFewSchools";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_input_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SingularNormalEquations:
    case ErrorKind::NonFinite:
    case ErrorKind::TooManyDegenerateResamples:
      return false;
    default:
      return true;
  }
}

}  // namespace geosafety
