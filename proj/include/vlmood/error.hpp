#pragma once

#include <stdexcept>
#include <string>

namespace vlmood {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (empty input, tau <= 0, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A statistic is mathematically undefined for the given input
/// (e.g. Pearson correlation with zero variance).
class UndefinedStatistic : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A JSON config or sweep spec could not be interpreted.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vlmood
