#pragma once

#include <cstdint>
#include <vector>

namespace psync {

// Result of fitting a Gaussian plus flat baseline to a folded histogram.
// The histogram is treated as circular with the given period.
struct PeakFit {
    bool found = false;         // a peak stands out of the background at all
    bool fit_converged = false; // false: moment estimate used instead of the fit
    double center_ps = 0.0;     // peak position in [0, period)
    double sigma_ps = 0.0;
    double amplitude = 0.0;     // Gaussian height, counts per bin
    double baseline = 0.0;      // flat background, counts per bin
    double signal_area = 0.0;   // integrated counts above baseline
    double bg_std = 0.0;        // robust spread of off-peak bins
    double significance = 0.0;  // signal area against background fluctuation
};

// Fits the highest peak of the histogram. Returns found=false when the
// histogram is empty or statistically flat.
PeakFit try_fit_peak(const std::vector<std::uint64_t>& hist, double bin_ps, double period_ps);

// Same, but only considers candidate maxima within max_dev_ps (circular) of
// expected_center_ps. Used by the tracking loop so a secondary peak half a
// period away cannot steal the lock.
PeakFit try_fit_peak_near(const std::vector<std::uint64_t>& hist, double bin_ps, double period_ps,
                          double expected_center_ps, double max_dev_ps);

// As try_fit_peak, but an empty or flat histogram throws NoPeakError.
PeakFit fit_peak(const std::vector<std::uint64_t>& hist, double bin_ps, double period_ps);

} // namespace psync
