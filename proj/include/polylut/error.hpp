#pragma once

#include <stdexcept>
#include <string>

namespace polylut {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user input: config files, datasets, checkpoints, dumps.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A configuration or architecture violates its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced non-finite values.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace polylut
