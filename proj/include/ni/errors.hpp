#pragma once

#include <stdexcept>
#include <string>

namespace ni {

// Exit codes used by the command line tool.
enum ExitCode : int { kOk = 0, kUsage = 2, kNumeric = 3, kIo = 4 };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return kUsage; }
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return kNumeric; }
};

class DomainError : public NumericError {
 public:
  using NumericError::NumericError;
};

class SingularError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ProtocolError : public NumericError {
 public:
  using NumericError::NumericError;
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return kIo; }
};

class ParseError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace ni
