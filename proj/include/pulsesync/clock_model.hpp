#pragma once

#include <cstdint>
#include <vector>

#include "pulsesync/types.hpp"

namespace psync {

enum class ClockKind { Ideal, Quartz, Rubidium };

// Oscillator description. The time error of a clock against ideal time is
//
//   x(t) = fractional_offset * t + 0.5 * linear_drift_rate * t^2 + x_noise(t)
//
// with t in seconds. Noise is synthesized as a sampled phase trajectory and
// interpolated linearly in between; rounding to integer picoseconds happens
// only when a local timestamp is produced.
struct ClockSpec {
    ClockKind kind = ClockKind::Ideal;
    double fractional_offset = 0.0;  // dimensionless (s/s)
    double linear_drift_rate = 0.0;  // fractional frequency change per second (1/s)
    double white_fm_amp = 0.0;       // std of per-sample fractional frequency
    double flicker_fm_amp = 0.0;     // flat Allan deviation level
    double random_walk_fm_amp = 0.0; // per-sample frequency random-walk step std
    double sample_interval_s = 1e-3;
    std::uint64_t seed = 0;

    static ClockSpec ideal();
    // Free-running quartz oscillator, noise floor around 3e-10 at 1 ms.
    static ClockSpec quartz(std::uint64_t seed);
    // Rubidium frequency standard, modified Allan deviation ~3e-12 at 1 s.
    static ClockSpec rubidium(std::uint64_t seed);

    bool has_noise() const {
        return white_fm_amp != 0.0 || flicker_fm_amp != 0.0 || random_walk_fm_amp != 0.0;
    }
    void validate() const; // throws ValidationError
};

// Discretized phase error x(t) = local_time - true_time, in ps, sampled at
// k * sample_interval with x[0] = 0.
struct PhaseTrajectory {
    double sample_interval_s = 1e-3;
    std::vector<double> phase_error_ps;
};

// Synthesizes the noise phase trajectory for [0, duration]: white FM is
// integrated white noise, random-walk FM doubly integrated white noise and
// flicker FM a sum of first-order filtered white-noise processes with three
// poles per decade. Deterministic per (spec, duration, interval). The
// deterministic offset/drift terms are not included here; they are evaluated
// in closed form by ClockModel.
PhaseTrajectory synthesize_trajectory(const ClockSpec& spec, double duration_s,
                                      double sample_interval_s);

class ClockModel {
  public:
    // Materializes noise for [0, duration_s] plus slack so that local->true
    // inversion near the end of a run stays in range.
    ClockModel(const ClockSpec& spec, double duration_s);

    // Time error x(t) in ps at true time t. Queries beyond the materialized
    // span throw RangeError; slightly negative t clamps to x(0) = 0.
    double time_error_ps(TimeTagPs t) const;

    // Local clock reading for true time t, rounded to integer ps.
    TimeTagPs local_time(TimeTagPs t) const;

    // Inverse of local_time. Fixed-point iteration; the contraction per
    // step is the fractional frequency offset (~1e-5), so four steps give
    // sub-ps accuracy.
    TimeTagPs true_time(TimeTagPs local) const;

    const ClockSpec& spec() const { return spec_; }
    double duration_s() const { return duration_s_; }

  private:
    double noise_ps(double t_ps) const;
    double error_ps_at(double t_ps) const;

    ClockSpec spec_;
    double duration_s_ = 0.0;
    PhaseTrajectory traj_;
};

} // namespace psync
