#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tsdl {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible extents, ranks or axes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A hyperparameter or argument outside its allowed range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed computation graph (cycle, dangling reference, duplicate name).
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Operation called in the wrong lifecycle state, e.g. backward before forward.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Unreadable file contents: bad magic, CRC, manifest or CSV field.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Unknown architecture name.
class RegistryError : public Error {
 public:
  using Error::Error;
};

/// Input violates a semantic precondition, e.g. non-normalized softmax rows.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Metric is undefined for the given labels.
class MetricError : public Error {
 public:
  using Error::Error;
};

/// Degenerate statistics: zero variance segment, batch too small to normalize.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Input series too short or empty for the requested operation.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class DivergedError : public Error {
 public:
  DivergedError(std::size_t epoch, const std::string& what)
      : Error(what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace tsdl
