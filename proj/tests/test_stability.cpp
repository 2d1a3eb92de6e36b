#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "pulsesync/clock_model.hpp"
#include "pulsesync/errors.hpp"
#include "pulsesync/stability.hpp"

using namespace psync;

namespace {

PhaseSeries white_pm(std::size_t n, double sigma_s, std::uint64_t seed, double tau0 = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sigma_s);
    PhaseSeries s;
    s.sample_interval_s = tau0;
    s.x_s.resize(n);
    for (auto& v : s.x_s) v = g(rng);
    return s;
}

std::vector<double> decade_taus(double tau0, int decades, int per_decade = 5) {
    std::vector<double> taus;
    for (int k = 0; k <= decades * per_decade; ++k) {
        const double m = std::round(std::pow(10.0, double(k) / per_decade));
        const double tau = m * tau0;
        if (taus.empty() || tau > taus.back()) taus.push_back(tau);
    }
    return taus;
}

} // namespace

TEST_CASE("white phase noise shows the -3/2 modified Allan slope") {
    const auto series = white_pm(200'000, 1e-11, 3);
    const auto curve = mdev(series, decade_taus(1.0, 3));
    const auto noise = identify_noise(curve);
    CHECK(std::abs(noise.exponent + 1.5) < 0.1);
    CHECK(noise.classification == NoiseClass::WhitePM);
    CHECK(noise.r_squared > 0.9);
}

TEST_CASE("flicker frequency noise shows the flat modified Allan slope") {
    ClockSpec spec;
    spec.kind = ClockKind::Quartz; // the ideal kind forbids noise terms
    spec.flicker_fm_amp = 3e-12;
    spec.seed = 5;
    const auto traj = synthesize_trajectory(spec, 400.0, 1e-3);
    PhaseSeries series;
    series.sample_interval_s = traj.sample_interval_s;
    for (double v : traj.phase_error_ps) series.x_s.push_back(v * 1e-12);
    // Plateau region: 30 ms to 3 s.
    std::vector<double> taus;
    for (double tau : decade_taus(1e-3, 4)) {
        if (tau >= 0.03 && tau <= 3.0) taus.push_back(tau);
    }
    const auto curve = mdev(series, taus);
    const auto noise = identify_noise(curve);
    CHECK(std::abs(noise.exponent) < 0.15);
    CHECK(noise.classification == NoiseClass::FlickerFM);
}

TEST_CASE("white phase noise suppresses faster in MDEV than in OADEV") {
    const auto series = white_pm(100'000, 1e-11, 7);
    const auto taus = decade_taus(1.0, 3);
    const auto m = identify_noise(mdev(series, taus));
    const auto o = identify_noise(oadev(series, taus));
    CHECK(m.exponent < o.exponent);
    CHECK(std::abs(o.exponent + 1.0) < 0.1); // white PM under OADEV: tau^-1
}

TEST_CASE("TDEV is exactly tau over root three times MDEV") {
    const auto spec = ClockSpec::quartz(9);
    const auto traj = synthesize_trajectory(spec, 60.0, 1e-3);
    PhaseSeries series;
    series.sample_interval_s = traj.sample_interval_s;
    for (double v : traj.phase_error_ps) series.x_s.push_back(v * 1e-12);
    const auto taus = decade_taus(1e-3, 3);
    const auto m = mdev(series, taus);
    const auto t = tdev(series, taus);
    REQUIRE(m.taus_s == t.taus_s);
    for (std::size_t i = 0; i < m.taus_s.size(); ++i) {
        const double expect = m.taus_s[i] / std::sqrt(3.0) * m.values[i];
        CHECK(std::abs(t.values[i] - expect) <= 1e-12 * std::abs(expect));
    }
    // Table-style spot check of the identity's arithmetic: MDEV 34e-12 at
    // tau = 1 s is a TDEV of 19.6 ps.
    CHECK(1.0 / std::sqrt(3.0) * 34e-12 * 1e12 == doctest::Approx(19.6).epsilon(0.01));
    CHECK(2.0 / std::sqrt(3.0) * 11e-12 * 1e12 == doctest::Approx(12.7).epsilon(0.01));
}

TEST_CASE("an all-zero series is degenerate, not an error") {
    PhaseSeries series;
    series.sample_interval_s = 1.0;
    series.x_s.assign(1000, 0.0);
    const auto curve = mdev(series, {1.0, 2.0, 5.0});
    CHECK(curve.degenerate);
    for (double v : curve.values) CHECK(v == 0.0);
}

TEST_CASE("second differences annihilate a linear phase ramp") {
    PhaseSeries ramp;
    ramp.sample_interval_s = 1.0;
    for (int i = 0; i < 2000; ++i) ramp.x_s.push_back(3.4e-9 * i + 7e-8);
    for (const auto& curve : {mdev(ramp, {1.0, 4.0, 16.0}), oadev(ramp, {1.0, 4.0, 16.0})}) {
        for (double v : curve.values) CHECK(v < 1e-20);
    }
}

TEST_CASE("estimators ignore a constant phase offset") {
    // The offset cancels in the second differences; what survives is the
    // rounding of sums carrying the large common term, so compare to a tight
    // relative tolerance rather than bit-exactly.
    auto series = white_pm(20'000, 1e-11, 11);
    auto shifted = series;
    for (auto& v : shifted.x_s) v += 1.23e-6;
    const auto taus = decade_taus(1.0, 2);
    const auto m0 = mdev(series, taus), m1 = mdev(shifted, taus);
    const auto o0 = oadev(series, taus), o1 = oadev(shifted, taus);
    REQUIRE(m0.values.size() == m1.values.size());
    for (std::size_t i = 0; i < m0.values.size(); ++i) {
        CHECK(m1.values[i] == doctest::Approx(m0.values[i]).epsilon(1e-6));
        CHECK(o1.values[i] == doctest::Approx(o0.values[i]).epsilon(1e-6));
    }
}

TEST_CASE("noise identification needs four points over a decade") {
    StabilityCurve two;
    two.taus_s = {1.0, 2.0};
    two.values = {1e-12, 5e-13};
    CHECK_THROWS_AS(identify_noise(two), ValidationError);

    StabilityCurve narrow;
    narrow.taus_s = {1.0, 2.0, 3.0, 4.0, 5.0};
    narrow.values = {1e-12, 9e-13, 8e-13, 7e-13, 6e-13};
    CHECK_THROWS_AS(identify_noise(narrow), ValidationError); // less than a decade

    StabilityCurve jumpy;
    jumpy.taus_s = {1.0, 3.0, 10.0, 30.0, 100.0};
    jumpy.values = {1e-12, 8e-12, 2e-13, 6e-12, 4e-13};
    CHECK(identify_noise(jumpy).classification == NoiseClass::Unclassified);
}

TEST_CASE("detrending removes a pure frequency ramp") {
    // 15.8 ns/s of accumulated offset, the scale a free-running quartz pair
    // builds up.
    PhaseSeries ramp;
    ramp.sample_interval_s = 0.1;
    for (int i = 0; i < 3000; ++i) ramp.x_s.push_back(15.8e-9 * (0.1 * i));
    double slope = 0.0;
    const auto flat = detrend_linear(ramp, &slope);
    CHECK(slope == doctest::Approx(15.8).epsilon(1e-9));
    for (double v : flat.x_s) CHECK(std::abs(v) < 1e-18);

    PhaseSeries zeros;
    zeros.sample_interval_s = 1.0;
    zeros.x_s.assign(100, 0.0);
    detrend_linear(zeros, &slope);
    CHECK(slope == doctest::Approx(0.0));
}

TEST_CASE("detrending recovers a noisy slope within its fit uncertainty") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g(0.0, 1e-9);
    PhaseSeries series;
    series.sample_interval_s = 1.0;
    const double true_slope = 2.7e-9; // s per s
    const std::size_t n = 10'000;
    for (std::size_t i = 0; i < n; ++i) series.x_s.push_back(true_slope * double(i) + g(rng));
    double slope_ns = 0.0;
    detrend_linear(series, &slope_ns);
    // Standard least-squares slope error: sigma * sqrt(12 / n^3) per unit x.
    const double sigma_slope = 1e-9 * std::sqrt(12.0 / (double(n) * double(n) * double(n)));
    CHECK(std::abs(slope_ns * 1e-9 - true_slope) < 3.0 * sigma_slope);
}

TEST_CASE("too-short series drop the tau with a warning") {
    const auto series = white_pm(50, 1e-12, 17);
    const auto curve = mdev(series, {1.0, 5.0, 30.0}); // 30 s needs 3m=90 samples
    CHECK(curve.taus_s == std::vector<double>{1.0, 5.0});
    REQUIRE(curve.warnings.size() == 1);
    CHECK(curve.warnings[0].find("30") != std::string::npos);
}

TEST_CASE("taus must be integer multiples of the sampling interval") {
    const auto series = white_pm(100, 1e-12, 19);
    CHECK_THROWS_AS(mdev(series, {1.5}), ValidationError);
    CHECK_THROWS_AS(oadev(series, {0.25}), ValidationError);
}

TEST_CASE("default tau grid is log-spaced and capped") {
    const auto grid = default_tau_grid(3000, 0.1);
    REQUIRE(!grid.empty());
    CHECK(grid.front() == doctest::Approx(0.1));
    CHECK(grid.back() <= 1000.0 * 0.1 / 1.0); // m capped at n/3
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
}

TEST_CASE("offset CSV round-trips into a phase series") {
    std::stringstream csv;
    csv << "time_s,offset_ps\n";
    for (int i = 0; i < 10; ++i) csv << (0.15 * i) << "," << (i * 2.0) << "\n";
    const auto series = read_offset_csv(csv, "roundtrip");
    CHECK(series.sample_interval_s == doctest::Approx(0.15));
    REQUIRE(series.x_s.size() == 10);
    CHECK(series.x_s[3] == doctest::Approx(6e-12));

    std::stringstream ragged;
    ragged << "time_s,offset_ps\n0,0\n1,1\n5,2\n";
    CHECK_THROWS_AS(read_offset_csv(ragged, "ragged"), ValidationError);
}
