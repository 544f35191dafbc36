#pragma once

#include <stdexcept>
#include <string>

namespace pcf {

// Raised for malformed inputs: bad shapes, bad configs, unreadable files.
// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a computation produces NaN/Inf or a solver cannot proceed
// (step underflow, blowup). The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace pcf
