#pragma once

#include <stdexcept>
#include <string>

namespace semistereo {

/// Base class for every error raised by the library. The CLI maps subclasses
/// deriving from ExpectedError to exit code 1 and anything else to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Errors caused by user input (bad files, bad configuration, bad data).
class ExpectedError : public Error {
 public:
  using Error::Error;
};

class FormatError : public ExpectedError {
 public:
  using ExpectedError::ExpectedError;
};

class UnsupportedError : public ExpectedError {
 public:
  using ExpectedError::ExpectedError;
};

class ConfigError : public ExpectedError {
 public:
  using ExpectedError::ExpectedError;
};

class IoError : public ExpectedError {
 public:
  using ExpectedError::ExpectedError;
};

class VersionError : public ExpectedError {
 public:
  using ExpectedError::ExpectedError;
};

class InsufficientDataError : public ExpectedError {
 public:
  using ExpectedError::ExpectedError;
};

/// A batch that leaves no pixel to average over (empty mask, all-invalid gt).
class DegenerateBatchError : public ExpectedError {
 public:
  using ExpectedError::ExpectedError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Violated precondition of a library call (negative disparity, upsampling
/// where only downsampling is allowed, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace semistereo
