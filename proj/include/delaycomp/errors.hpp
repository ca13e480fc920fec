#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace delaycomp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input validation failures.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ControllabilityError : public Error {
 public:
  using Error::Error;
};

/// The nominal gain does not satisfy the design premise (A+BK Hurwitz).
class DesignError : public Error {
 public:
  using Error::Error;
};

class FeedforwardError : public Error {
 public:
  using Error::Error;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

class HistoryError : public Error {
 public:
  using Error::Error;
};

class ComparisonError : public Error {
 public:
  using Error::Error;
};

/// Malformed run specification or document.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Numerical failures.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, std::size_t pivot)
      : Error(what), pivot_(pivot) {}
  /// Zero-based index of the first pivot that fell below the threshold.
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class NotHurwitzError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace delaycomp
