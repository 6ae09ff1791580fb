#pragma once

#include <stdexcept>
#include <string>

namespace deskflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed binary or text input (bad magic, unparsable value).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input stream ended before the declared payload.
class LengthError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace deskflow
