#pragma once

#include <stdexcept>
#include <string>

namespace fscd {

// File-level failures (missing files, unwritable paths, malformed inputs).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint files carry a magic/version/header/payload structure; each way a
// file can be unusable maps to its own kind so callers can tell them apart.
struct CheckpointError : IoError {
  enum class Kind { BadMagic, BadVersion, Truncated, NameSetMismatch };

  CheckpointError(Kind k, const std::string& msg) : IoError(msg), kind(k) {}

  Kind kind;
};

// Non-finite loss or other numeric breakdown during optimization.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// A verification suite (gradient check) exceeded its tolerance.
struct VerificationError : std::runtime_error {
  explicit VerificationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fscd
