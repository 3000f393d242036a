#pragma once

#include <stdexcept>
#include <string>

namespace handctl {

/// Base for all library errors. Each subclass names one failure family so
/// callers (and the CLI) can map it to a diagnostic and exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise malformed input values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Bad model, calibration, or plant configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Automated calibration could not find tension / limit, or tripped the load ceiling.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Human pose with coincident or too-short links.
class DegeneratePoseError : public Error {
 public:
  using Error::Error;
};

/// Encoder wire-protocol failures.
class FramingError : public Error {
 public:
  using Error::Error;
};

class CorruptFrameError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

/// Offset calibration readings scattered too widely.
class UnstablePoseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace handctl
