#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace storyline {

// Every error raised by the library derives from Error so callers that only
// care about "something failed" can catch a single type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class ConstraintConflict : public Error {
 public:
  using Error::Error;
};

// Carries a human-readable description of each constraint that takes part in
// the infeasible subsystem.
class InfeasibleConstraints : public Error {
 public:
  InfeasibleConstraints(const std::string& what, std::vector<std::string> conflicting)
      : Error(what), conflicting_(std::move(conflicting)) {}

  const std::vector<std::string>& conflicting() const noexcept { return conflicting_; }

 private:
  std::vector<std::string> conflicting_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class EmptySelection : public Error {
 public:
  using Error::Error;
};

class NotAdjacent : public Error {
 public:
  using Error::Error;
};

class BadBounds : public Error {
 public:
  using Error::Error;
};

class DegenerateLayout : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class NoValidAction : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

class ExhaustedRetries : public Error {
 public:
  using Error::Error;
};

}  // namespace storyline
