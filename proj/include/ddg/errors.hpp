#pragma once

#include <stdexcept>
#include <string>

namespace ddg {

// Dimension disagreement between matrix operands.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated call contract (bad label, non-scalar loss, ...).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad key/value in a run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem-level failure (missing file, unwritable directory).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed data file; message carries the byte offset where parsing stopped.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint file unusable (bad magic, version, or shape mismatch).
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value reached a place that requires finite numbers.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ddg
