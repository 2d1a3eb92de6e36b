#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pulsesync/peak_fit.hpp"
#include "pulsesync/types.hpp"

namespace psync {

struct SweepResult {
    std::vector<double> grid;          // trial fractional frequency offsets
    std::vector<double> significances; // peak significance per trial
    std::size_t best_index = 0;
    double best_offset = 0.0;
    PeakFit best_fit;
};

// No trial reached the significance threshold; carries the best candidate
// anyway so callers can report what was almost found.
class SweepFailedError : public std::runtime_error {
  public:
    SweepFailedError(const std::string& what, SweepResult best)
        : std::runtime_error(what), best_(std::move(best)) {}
    const SweepResult& best() const { return best_; }

  private:
    SweepResult best_;
};

struct SweepParams {
    double range = 2e-5;      // trials cover [-range, +range]
    double step = 5e-10;      // trial spacing, fractional (1 ns/s = 1e-9)
    double bin_ps = 1.0;
    double s_threshold = 5.0; // minimum significance to accept the result
};

// Folds the tag stream at f_c * (1 + u) for every trial offset u on the
// grid, fits the correlation peak, and returns the most significant trial.
// Trials are independent; the parallel variant runs them across OpenMP
// threads and is bit-identical to the serial reference.
SweepResult frequency_sweep(const TimeTagPs* tags, std::size_t n, double f_c_hz,
                            const SweepParams& params);
SweepResult frequency_sweep_serial(const TimeTagPs* tags, std::size_t n, double f_c_hz,
                                   const SweepParams& params);

inline SweepResult frequency_sweep(const std::vector<TimeTagPs>& tags, double f_c_hz,
                                   const SweepParams& params) {
    return frequency_sweep(tags.data(), tags.size(), f_c_hz, params);
}

} // namespace psync
