#pragma once

#include <stdexcept>
#include <string>

namespace gratis {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or parameter shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents or a filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration value or unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gratis
