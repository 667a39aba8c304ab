#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace drive {

// A caller broke a documented precondition (shape mismatch, out-of-range
// argument, invalid flag combination).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A binary container could not be decoded. `offset` is the byte position at
// which decoding failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric is undefined for the given input (for example AUC over a single class).
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// NaN or Inf detected while finite-value checking is enabled.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace drive

#define DRIVE_REQUIRE(cond, msg)                     \
  do {                                               \
    if (!(cond)) throw ::drive::ContractError(msg);  \
  } while (false)
