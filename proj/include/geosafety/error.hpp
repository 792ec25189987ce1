#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geosafety {

enum class ErrorKind {
  InvalidArgument,
  ProjectionRange,
  MalformedXml,
  UnsupportedVersion,
  ConfigError,
  RadiusExceedsIndex,
  SchemaError,
  RangeError,
  DuplicateResponse,
  UnknownId,
  MissingFeatures,
  SingularNormalEquations,
  NonFinite,
  ShapeMismatch,
  EmptyInput,
  TooManyDegenerateResamples,
  TooFewSchools,
  SingularDesign,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// True for errors caused by user-supplied input (CLI exit code 2).
bool is_input_error(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace geosafety
