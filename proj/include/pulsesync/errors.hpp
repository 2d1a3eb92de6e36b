#pragma once

#include <stdexcept>
#include <string>

namespace psync {

// Invalid parameter values (non-finite, out of range, bad units).
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Query outside a materialized clock trajectory.
class RangeError : public std::runtime_error {
  public:
    explicit RangeError(const std::string& what) : std::runtime_error(what) {}
};

// Simulation would produce more tags than the configured hard cap.
class CapacityError : public std::runtime_error {
  public:
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// Histogram has no usable correlation peak (all zero or flat).
class NoPeakError : public std::runtime_error {
  public:
    explicit NoPeakError(const std::string& what) : std::runtime_error(what) {}
};

// QBER dip search found no shift with an error rate below threshold.
class AlignmentFailedError : public std::runtime_error {
  public:
    explicit AlignmentFailedError(const std::string& what) : std::runtime_error(what) {}
};

// Slip recovery exhausted its candidates; the caller must reinitialize.
class ResyncRequiredError : public std::runtime_error {
  public:
    explicit ResyncRequiredError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
  public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace psync
