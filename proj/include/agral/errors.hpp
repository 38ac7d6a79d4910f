#pragma once

#include <stdexcept>
#include <string>

namespace agral {

// Error taxonomy mirrored by the CLI exit codes: config errors exit 2,
// data errors exit 3, training/runtime errors exit 4.

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainError : std::runtime_error {
  explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Container-format violations, each its own type so callers can tell
// a corrupt header from a short file.
struct BadMagicError : DataError {
  explicit BadMagicError(const std::string& msg) : DataError(msg) {}
};

struct TruncatedPayloadError : DataError {
  explicit TruncatedPayloadError(const std::string& msg) : DataError(msg) {}
};

struct DimOverflowError : DataError {
  explicit DimOverflowError(const std::string& msg) : DataError(msg) {}
};

}  // namespace agral
