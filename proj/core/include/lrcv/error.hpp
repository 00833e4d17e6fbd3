#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lrcv {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration: unknown keys, bad parameter values, unsupported tags.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or otherwise inadmissible input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (singular system, empty factorization, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A model evaluation failed. Carries the level and the offending input vector.
class ModelError : public NumericalError {
 public:
  ModelError(const std::string& what, std::size_t level, std::vector<double> input)
      : NumericalError(what), level_(level), input_(std::move(input)) {}

  std::size_t level() const noexcept { return level_; }
  const std::vector<double>& input() const noexcept { return input_; }

 private:
  std::size_t level_;
  std::vector<double> input_;
};

}  // namespace lrcv
