#pragma once

#include <stdexcept>
#include <string>

namespace ffvd {

/// Error categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int { usage = 1, data = 2, numerical = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

/// Malformed input data, I/O failures, and argument shape mismatches.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class ShapeError : public DataError {
 public:
  explicit ShapeError(const std::string& what) : DataError("shape mismatch: " + what) {}
};

class InsufficientSamplesError : public DataError {
 public:
  InsufficientSamplesError(std::size_t have, std::size_t need)
      : DataError("insufficient samples: have " + std::to_string(have) + ", need at least " +
                  std::to_string(need)),
        have_(have) {}
  std::size_t have() const noexcept { return have_; }

 private:
  std::size_t have_;
};

class NumericalError : public Error {
 public:
  /// `index` locates the offending term (time step, coordinate or iteration); -1 if none.
  NumericalError(const std::string& what, long index = -1)
      : Error(ErrorKind::numerical,
              index >= 0 ? what + " (index " + std::to_string(index) + ")" : what),
        index_(index) {}
  long index() const noexcept { return index_; }

 private:
  long index_;
};

class NonPsdError : public NumericalError {
 public:
  NonPsdError(const std::string& what, double last_jitter)
      : NumericalError(what + " (last jitter " + std::to_string(last_jitter) + ")"),
        last_jitter_(last_jitter) {}
  double last_jitter() const noexcept { return last_jitter_; }

 private:
  double last_jitter_;
};

class WeightCollapseError : public NumericalError {
 public:
  explicit WeightCollapseError(long t)
      : NumericalError("all particle weights vanished", t) {}
};

}  // namespace ffvd
