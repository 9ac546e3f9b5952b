#pragma once

#include <stdexcept>
#include <string>

namespace nnpde {

// Base of every error thrown by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched grids, shapes or sizes.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Non-finite or otherwise invalid input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Solver breakdown or divergence. time_index is -1 when not tied to a step.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, int time_index = -1)
      : Error(what), time_index_(time_index) {}
  int time_index() const { return time_index_; }

 private:
  int time_index_;
};

// A configured memory budget would be exceeded.
class ResourceError : public Error {
 public:
  ResourceError(const std::string& what, std::size_t required_bytes)
      : Error(what), required_bytes_(required_bytes) {}
  std::size_t required_bytes() const { return required_bytes_; }

 private:
  std::size_t required_bytes_;
};

}  // namespace nnpde
