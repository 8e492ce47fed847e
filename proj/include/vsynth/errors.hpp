#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vsynth {

/// Invalid distribution parameters or a value outside an operation's domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Tortuosity of a curve whose endpoints coincide.
class DegenerateChordError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Shape or length mismatch between volumes, patches or buffers.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fused output has voxels that no patch contributed to.
class CoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported configuration document.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failure (missing, unreadable or unwritable path).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed volume file; carries the byte offset of the offending field.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Volume file shorter than its header declares.
class LengthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Regenerated or reloaded data does not match its recorded checksum.
class ChecksumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vsynth
