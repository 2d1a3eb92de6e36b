#pragma once

#include <cmath>
#include <limits>

#include "pulsesync/peak_fit.hpp"

namespace psync {

// Expected statistical significance of a correlation peak from count rates
// alone: r_c is the coincidence rate, r_a and r_b the singles rates of the
// two sides, delta_u the fractional frequency step of the search. A zero
// step means a single exact fold, reported as infinite significance.
inline double pair_significance(double r_c, double r_a, double r_b, double delta_u) {
    if (delta_u == 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(r_c * r_c / (r_a * r_b * delta_u));
}

// Significance of a fitted histogram peak: integrated signal counts against
// the background fluctuation over the effective peak width. The denominator
// is floored at one count so an empty background cannot inflate the result.
inline double fit_significance(const PeakFit& fit, double bin_ps) {
    if (!fit.found) return 0.0;
    const double n_eff = std::sqrt(2.0 * M_PI) * fit.sigma_ps / bin_ps;
    const double denom = std::max(fit.bg_std * std::sqrt(std::max(n_eff, 0.0)), 1.0);
    return fit.signal_area / denom;
}

// Two-sided Gaussian confidence for a significance value, e.g. 3 -> 0.997.
inline double significance_to_confidence(double s) {
    return std::erf(s / std::sqrt(2.0));
}

} // namespace psync
