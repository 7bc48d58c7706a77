#pragma once

#include <stdexcept>
#include <string>

namespace hsissl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Batch statistics requested on a single-sample batch.
class DegenerateBatchError : public DimensionError {
 public:
  using DimensionError::DimensionError;
};

/// Class label outside [0, num_classes).
class LabelError : public Error {
 public:
  using Error::Error;
};

/// Backward pass misuse (non-scalar loss, disconnected graph).
class GraphError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf values, divergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed scene, label or checkpoint file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Files that are individually valid but disagree with each other.
class ConsistencyError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Few-shot split cannot be drawn from the label map.
class SplitError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Synthetic scene constraints could not be met.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Process exit code for an exception escaping the CLI:
/// 2 configuration, 3 data format, 4 numerical failure, 1 anything else.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace hsissl
