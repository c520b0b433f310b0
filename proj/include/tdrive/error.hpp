#pragma once

#include <stdexcept>
#include <string>

namespace tdrive {

/// Raised for every recoverable failure in the library: bad shapes,
/// invalid configuration, spawn budget exhaustion, IO problems.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tdrive
