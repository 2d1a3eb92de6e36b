#pragma once

#include <cstdint>
#include <vector>

#include "pulsesync/types.hpp"

namespace psync {

// Exact modular fold of integer picosecond tags against a clock period.
//
// A double frequency f (cycles per ps) is decomposed as mant * 2^-shift with
// integer mant, so the fractional phase of an integer tag t is
//
//   frac(t * f) = ((t * mant) mod 2^shift) * 2^-shift
//
// computed in 128-bit integer arithmetic. This is bit-exact for any t, never
// loses precision for large t the way frac(t * f) in double would, and the
// two's-complement wrap of negative t is harmless because 2^64 * mant is a
// multiple of 2^shift (shift is capped at 64).
struct FoldRational {
    std::uint64_t mant = 1;
    int shift = 0;
    double period_ps = 1.0;

    static FoldRational from_frequency_per_ps(double f);
    static FoldRational from_frequency_hz(double hz) { return from_frequency_per_ps(hz * 1e-12); }
    static FoldRational from_period_ps(double period) {
        return from_frequency_per_ps(1.0 / period);
    }

    double frequency_per_ps() const;
    // Fractional phase in [0, 1).
    double phase01(TimeTagPs t) const;
    // t mod period, in [0, period).
    double fold_ps(TimeTagPs t) const { return phase01(t) * period_ps; }
    // Frequency scaled by `factor`, e.g. 1 + du after a tracking update.
    FoldRational scaled(double factor) const;
};

// Signed minimal circular difference a - b, result in (-period/2, period/2].
double circular_diff(double a, double b, double period);

// Non-negative remainder in [0, period).
double positive_mod(double value, double period);

// Folds every tag, returning the per-tag values in [0, period). An empty
// stream yields an empty result.
std::vector<double> fold_modulo(const TimeTagPs* tags, std::size_t n, const FoldRational& fold,
                                TimeTagPs reference = 0);

// Histogram of already folded values. Values must lie in [0, period_ps).
std::vector<std::uint64_t> build_histogram(const std::vector<double>& folded, double period_ps,
                                           double bin_ps);

// Histogram of (t - reference) mod period with the given bin width.
// Bin count is ceil(period / bin_ps). Serial and OpenMP variants produce
// identical counts; the serial one is the reference for tests.
std::vector<std::uint64_t> fold_histogram_serial(const TimeTagPs* tags, std::size_t n,
                                                 const FoldRational& fold, TimeTagPs reference,
                                                 double bin_ps);
std::vector<std::uint64_t> fold_histogram(const TimeTagPs* tags, std::size_t n,
                                          const FoldRational& fold, TimeTagPs reference,
                                          double bin_ps);

inline std::vector<std::uint64_t> fold_histogram(const std::vector<TimeTagPs>& tags,
                                                 const FoldRational& fold, TimeTagPs reference,
                                                 double bin_ps) {
    return fold_histogram(tags.data(), tags.size(), fold, reference, bin_ps);
}

// Adds tags into an existing histogram (streaming use).
void fold_histogram_accumulate(std::vector<std::uint64_t>& hist, const TimeTagPs* tags,
                               std::size_t n, const FoldRational& fold, TimeTagPs reference,
                               double bin_ps);

} // namespace psync
