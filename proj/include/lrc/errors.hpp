#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lrc {

enum class ErrorKind {
  DimensionMismatch,
  NotPositiveDefinite,
  NotSymmetric,
  RankOutOfBounds,
  BadGroupsize,
  EmptyCandidates,
  AlreadyFinalized,
  EmptyStats,
  NotFinalized,
  BadIterationCount,
  DimNotPowerOfTwo,
  InvalidArgument,
  Config,
  Io,
  Format,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised when a Cholesky pivot is not strictly positive. The caller is
// expected to raise the damping and retry.
class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(std::size_t pivot_index)
      : Error(ErrorKind::NotPositiveDefinite,
              "matrix is not positive definite (pivot " +
                  std::to_string(pivot_index) + ")"),
        pivot_index_(pivot_index) {}

  std::size_t pivot_index() const noexcept { return pivot_index_; }

 private:
  std::size_t pivot_index_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace lrc
