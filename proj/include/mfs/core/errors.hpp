#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mfs {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or violated preconditions.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or incompatible files.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Missing or unreadable files.
class FileError : public Error {
 public:
  using Error::Error;
};

/// Eigensolver or linear-solver failures, unreachable horizons, NaN losses.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Raised by the trainer; carries the epoch at which training failed.
class TrainingError : public NumericalError {
 public:
  TrainingError(const std::string& what, int epoch)
      : NumericalError(what), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// A statistical estimate cannot be formed, e.g. every sample is censored.
class EstimationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace mfs
