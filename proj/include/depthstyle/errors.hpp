#pragma once

#include <stdexcept>
#include <string>

namespace depthstyle {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad field values, unknown layer or backend names.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Invalid call arguments such as mismatched shapes.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed archive or file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Archive written with an unsupported format version.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Archive contents do not match their recorded checksum or length.
class IntegrityError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// An external asset (weights, style image, dataset) cannot be resolved.
class SetupError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced during a computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The requested work would not fit in the configured memory budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace depthstyle
