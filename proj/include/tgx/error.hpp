#pragma once

#include <stdexcept>
#include <string>

namespace tgx {

// Base of every error thrown by the library. The CLI maps subclasses onto
// process exit codes via exit_code().
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 5; }
};

class ParseError : public Error {
public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class DimensionError : public Error {
public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Inconsistent matrix shapes handed to the model.
class ShapeError : public DimensionError {
public:
  using DimensionError::DimensionError;
};

class RangeError : public Error {
public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

class IndexError : public RangeError {
public:
  using RangeError::RangeError;
};

class ValueError : public Error {
public:
  using Error::Error;
};

class MissingVariableError : public Error {
public:
  using Error::Error;
};

class EmptyDataError : public Error {
public:
  using Error::Error;
};

class IOError : public Error {
public:
  using Error::Error;
};

class ProtocolError : public Error {
public:
  using Error::Error;
};

class TimeoutError : public ProtocolError {
public:
  using ProtocolError::ProtocolError;
};

class MismatchError : public ProtocolError {
public:
  using ProtocolError::ProtocolError;
};

}  // namespace tgx
