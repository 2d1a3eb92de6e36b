#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "pulsesync/errors.hpp"
#include "pulsesync/peak_fit.hpp"
#include "pulsesync/significance.hpp"

using namespace psync;

namespace {

// Gaussian peak over a flat floor, sampled, not fitted-from: the generator
// the fit has to recover.
std::vector<std::uint64_t> gaussian_hist(double period, double center, double sigma,
                                         std::size_t counts, double bg_per_bin,
                                         std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> peak(center, sigma);
    std::vector<std::uint64_t> h(std::size_t(period), 0);
    for (std::size_t i = 0; i < counts; ++i) {
        double v = std::fmod(peak(rng), period);
        if (v < 0) v += period;
        ++h[std::size_t(v)];
    }
    if (bg_per_bin > 0) {
        std::poisson_distribution<std::uint64_t> bg(bg_per_bin);
        for (auto& c : h) c += bg(rng);
    }
    return h;
}

} // namespace

TEST_CASE("fit recovers the generating Gaussian") {
    const auto h = gaussian_hist(2000.0, 1000.0, 39.0, 100'000, 20.0, 3);
    const auto fit = fit_peak(h, 1.0, 2000.0);
    CHECK(fit.found);
    CHECK(std::abs(fit.center_ps - 1000.0) < 1.0);
    CHECK(fit.sigma_ps == doctest::Approx(39.0).epsilon(0.05));
    CHECK(fit.signal_area == doctest::Approx(100'000.0).epsilon(0.05));
    CHECK(fit.significance > 100.0);
}

TEST_CASE("a peak straddling the wrap fits like its unwrapped copy") {
    const auto wrapped = gaussian_hist(2000.0, 8.0, 39.0, 100'000, 10.0, 5);
    const auto centered = gaussian_hist(2000.0, 1008.0, 39.0, 100'000, 10.0, 5);
    const auto fw = fit_peak(wrapped, 1.0, 2000.0);
    const auto fc = fit_peak(centered, 1.0, 2000.0);
    // Same draw, shifted by half a period: centers must agree modulo the
    // shift and widths must match closely.
    const double recentered = std::fmod(fc.center_ps - 1000.0 + 2000.0, 2000.0);
    CHECK(std::abs(fw.center_ps - recentered) < 0.5);
    CHECK(fw.sigma_ps == doctest::Approx(fc.sigma_ps).epsilon(0.01));
}

TEST_CASE("flat histograms carry no peak") {
    std::vector<std::uint64_t> zeros(2000, 0);
    CHECK_THROWS_AS(fit_peak(zeros, 1.0, 2000.0), NoPeakError);
    CHECK_FALSE(try_fit_peak(zeros, 1.0, 2000.0).found);

    std::mt19937_64 rng(7);
    std::poisson_distribution<std::uint64_t> bg(400.0);
    std::vector<std::uint64_t> flat(2000);
    for (auto& c : flat) c = bg(rng);
    CHECK_FALSE(try_fit_peak(flat, 1.0, 2000.0).found);
}

TEST_CASE("windowed fit refuses peaks away from the expected center") {
    const auto h = gaussian_hist(2000.0, 1500.0, 39.0, 50'000, 5.0, 9);
    const auto near = try_fit_peak_near(h, 1.0, 2000.0, 1500.0, 200.0);
    CHECK(near.found);
    CHECK(std::abs(near.center_ps - 1500.0) < 2.0);
    const auto far = try_fit_peak_near(h, 1.0, 2000.0, 500.0, 200.0);
    CHECK_FALSE(far.found);
}

TEST_CASE("expected pair significance evaluates the rate formula") {
    // r_C = 1e5 cps against 5e8 x 2.7e5 singles at a 1e-8 step.
    const double s = pair_significance(1e5, 5e8, 2.7e5, 1e-8);
    CHECK(s == doctest::Approx(86.066).epsilon(0.001));
    // Linear in the coincidence rate.
    CHECK(pair_significance(2e5, 5e8, 2.7e5, 1e-8) == doctest::Approx(2.0 * s).epsilon(1e-12));
    // A zero step means an exact fold, not a division crash.
    CHECK(std::isinf(pair_significance(1e5, 5e8, 2.7e5, 0.0)));
}

TEST_CASE("significance maps to Gaussian confidence") {
    CHECK(significance_to_confidence(3.0) == doctest::Approx(0.9973).epsilon(1e-4));
    CHECK(significance_to_confidence(0.0) == doctest::Approx(0.0));
}
