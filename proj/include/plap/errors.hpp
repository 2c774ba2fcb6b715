#pragma once

#include <stdexcept>
#include <string>

namespace plap {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid problem or experiment configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Query outside the computational domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine hit a state it cannot recover from.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A measurement that cannot be carried out on the given data.
class MeasurementError : public Error {
 public:
  using Error::Error;
};

/// A hypothesis required by a measurement is violated.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A field lies below the obstacle beyond tolerance.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::size_t node)
      : Error(what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

}  // namespace plap
