#pragma once

#include <stdexcept>
#include <string>

namespace advlab {

// Raised for bad user-supplied input (config files, CLI flags, data files).
// Callers map this to a validation exit code; programming-contract
// violations use std::invalid_argument instead.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace advlab
