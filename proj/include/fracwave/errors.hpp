#pragma once

#include <stdexcept>

namespace fracwave {

/// Base class for all fracwave errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDomainError : public Error {
 public:
  using Error::Error;
};

class OrderRangeError : public Error {
 public:
  using Error::Error;
};

class GridMismatchError : public Error {
 public:
  using Error::Error;
};

class NonFiniteValueError : public Error {
 public:
  using Error::Error;
};

/// Precondition violation on a solver or check input.
class InvalidProblemError : public Error {
 public:
  using Error::Error;
};

class SingularSystemError : public Error {
 public:
  using Error::Error;
};

class NoValidActiveSetError : public Error {
 public:
  using Error::Error;
};

class TimeRangeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UnknownPresetError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fracwave
