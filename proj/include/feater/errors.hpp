#pragma once

#include <stdexcept>
#include <string>

namespace feater {

// Shape/extent mismatch between tensors or between a tensor and parameters.
struct DimensionError : std::invalid_argument {
  explicit DimensionError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Out-of-range scalar argument (eps, ratio, extents of zero, ...).
struct ParameterError : std::invalid_argument {
  explicit ParameterError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Inconsistent configuration objects (depth vs params list, missing mask plan, ...).
struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Operation requested in a state that does not support it (e.g. MAC report
// from a pass that ran without counting).
struct StateError : std::logic_error {
  explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

// NaN/Inf where a finite value is required.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// File read/write failure.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace feater
