#pragma once

#include <stdexcept>
#include <string>

namespace crossview {

// Bad input from the caller or operator: wrong flags, malformed files,
// contract violations at an API boundary. Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Failure while doing otherwise-valid work: I/O errors, non-finite math,
// training faults. Maps to CLI exit code 2.
class RuntimeFault : public std::runtime_error {
 public:
  explicit RuntimeFault(const std::string& what) : std::runtime_error(what) {}
};

class NonFiniteError : public RuntimeFault {
 public:
  explicit NonFiniteError(const std::string& layer)
      : RuntimeFault("non-finite activation in layer '" + layer + "'"), layer_(layer) {}
  const std::string& layer() const { return layer_; }

 private:
  std::string layer_;
};

}  // namespace crossview
