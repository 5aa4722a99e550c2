#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mina {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class FrameMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidDepth : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. `location()` is a byte offset for binary files
/// and a 1-based line number for line-oriented text files.
class FormatError : public Error {
 public:
  enum class Unit { Byte, Line };

  FormatError(const std::string& what, Unit unit, std::uint64_t location)
      : Error(what + (unit == Unit::Byte ? " (at byte offset " : " (at line ") +
              std::to_string(location) + ")"),
        unit_(unit),
        location_(location) {}

  Unit unit() const { return unit_; }
  std::uint64_t location() const { return location_; }

 private:
  Unit unit_;
  std::uint64_t location_;
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(std::size_t step)
      : Error("training diverged: non-finite loss at step " + std::to_string(step)),
        step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace mina
