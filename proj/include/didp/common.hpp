#pragma once

#include <stdexcept>
#include <string>

namespace didp {

inline constexpr const char* kVersion = "0.1.0";

// Input rejected before any computation starts: malformed panels, invalid
// SCM definitions, bad indices or option values.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// A well-formed request that cannot be answered from the data at hand
// (empty arm, degenerate bootstrap, conditioning event below the
// positivity floor).
class EstimationError : public std::runtime_error {
 public:
  explicit EstimationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace didp
