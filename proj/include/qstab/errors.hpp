#pragma once

#include <stdexcept>
#include <string>

namespace qstab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rate function returned a value outside [0, bound] or a non-finite value.
class BoundViolation : public Error {
 public:
  using Error::Error;
};

class InvalidShape : public Error {
 public:
  using Error::Error;
};

class NoUniformLimit : public Error {
 public:
  using Error::Error;
};

class SaturationNotConverged : public Error {
 public:
  using Error::Error;
};

class BoxTooLarge : public Error {
 public:
  using Error::Error;
};

class SolveFailure : public Error {
 public:
  using Error::Error;
};

class PermutationCapExceeded : public Error {
 public:
  using Error::Error;
};

class ScenarioError : public Error {
 public:
  ScenarioError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace qstab
