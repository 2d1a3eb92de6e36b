#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace psync {

// Uniformly sampled timing-offset record. Values are phase (time error) in
// seconds; sample k sits at k * sample_interval_s.
struct PhaseSeries {
    double sample_interval_s = 1.0;
    std::vector<double> x_s;
    std::string label;
};

enum class StabilityEstimator { MDEV, TDEV, OADEV };

struct StabilityCurve {
    StabilityEstimator estimator = StabilityEstimator::MDEV;
    std::vector<double> taus_s;
    std::vector<double> values; // dimensionless for MDEV/OADEV, seconds for TDEV
    std::vector<std::string> warnings;
    bool degenerate = false;    // every value exactly zero
};

enum class NoiseClass { WhitePM, FlickerPM, FlickerFM, Unclassified };

struct NoiseIdentification {
    double exponent = 0.0;  // log-log slope
    double r_squared = 0.0;
    NoiseClass classification = NoiseClass::Unclassified;
};

// Logarithmic grid, 10 points per decade, from tau0 up to n*tau0/3.
std::vector<double> default_tau_grid(std::size_t n_samples, double tau0_s);

// Modified Allan deviation over triple-averaged second differences of phase.
// Requested taus the series is too short for are omitted with a warning.
StabilityCurve mdev(const PhaseSeries& x, const std::vector<double>& taus_s);

// Time deviation, computed from mdev as (tau/sqrt(3)) * MDEV so the identity
// holds exactly.
StabilityCurve tdev(const PhaseSeries& x, const std::vector<double>& taus_s);

// Overlapping Allan deviation on phase data.
StabilityCurve oadev(const PhaseSeries& x, const std::vector<double>& taus_s);

// Least-squares log-log slope, classified to the nearest of the MDEV power
// laws tau^0 (flicker FM), tau^-1 (flicker PM), tau^-3/2 (white PM).
// Requires >= 4 usable points spanning at least one decade.
NoiseIdentification identify_noise(const StabilityCurve& curve);

// Removes the least-squares line; the removed slope is reported in ns/s.
PhaseSeries detrend_linear(const PhaseSeries& x, double* slope_ns_per_s = nullptr);

// CSV interop: curves as (tau_s, value, estimator); offset records as
// (time_s, offset_ps), located by header name so the per-update session CSV
// works too.
void write_curve_csv(const StabilityCurve& curve, std::ostream& out);
PhaseSeries read_offset_csv(std::istream& in, const std::string& label);

const char* estimator_name(StabilityEstimator e);
const char* noise_class_name(NoiseClass c);

} // namespace psync
