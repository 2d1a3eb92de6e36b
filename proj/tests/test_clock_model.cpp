#include <doctest.h>

#include <cmath>
#include <vector>

#include "pulsesync/clock_model.hpp"
#include "pulsesync/errors.hpp"
#include "pulsesync/stability.hpp"

using namespace psync;

namespace {

PhaseSeries to_series(const PhaseTrajectory& traj) {
    PhaseSeries s;
    s.sample_interval_s = traj.sample_interval_s;
    s.x_s.reserve(traj.phase_error_ps.size());
    for (double v : traj.phase_error_ps) s.x_s.push_back(v * 1e-12);
    return s;
}

// Quartz kind with every term zeroed: the ideal kind enforces all-zero
// parameters, so custom single-term specs start from this.
ClockSpec bare_spec() {
    ClockSpec s;
    s.kind = ClockKind::Quartz;
    return s;
}

} // namespace

TEST_CASE("ideal clock reads true time") {
    ClockModel clk(ClockSpec::ideal(), 1.0);
    CHECK(clk.local_time(123456) == 123456);
    CHECK(clk.time_error_ps(123456) == doctest::Approx(0.0));
}

TEST_CASE("fractional offset accumulates linearly") {
    ClockSpec spec = bare_spec();
    spec.fractional_offset = 1e-8;
    ClockModel clk(spec, 1.5);
    // +1e-8 over one second: 10 ns fast.
    CHECK(clk.local_time(1'000'000'000'000) == 1'000'000'000'000 + 10'000);
}

TEST_CASE("linear drift integrates to a quadratic phase") {
    ClockSpec spec = bare_spec();
    spec.linear_drift_rate = 2e-9; // 1/s
    ClockModel clk(spec, 2.0);
    for (double t_s : {0.25, 0.5, 1.0, 1.7}) {
        const TimeTagPs t = TimeTagPs(t_s * 1e12);
        const double expect_ps = 0.5 * spec.linear_drift_rate * t_s * t_s * 1e12;
        CHECK(clk.time_error_ps(t) == doctest::Approx(expect_ps).epsilon(1e-9));
        // Timestamps quantize the same error to integer picoseconds.
        CHECK(std::abs(double(clk.local_time(t) - t) - expect_ps) <= 0.5);
    }
}

TEST_CASE("offsets compose additively") {
    ClockSpec a = bare_spec(), b = bare_spec(), ab = bare_spec();
    a.fractional_offset = 3e-7;
    b.fractional_offset = -5e-8;
    ab.fractional_offset = a.fractional_offset + b.fractional_offset;
    ClockModel ca(a, 1.0), cb(b, 1.0), cab(ab, 1.0);
    for (TimeTagPs t : {TimeTagPs(1), TimeTagPs(999'999'999), TimeTagPs(1'000'000'000'000)})
        CHECK(cab.time_error_ps(t) == doctest::Approx(ca.time_error_ps(t) + cb.time_error_ps(t)));
}

TEST_CASE("ideal trajectory is all zeros") {
    const auto traj = synthesize_trajectory(ClockSpec::ideal(), 0.5, 1e-3);
    REQUIRE(traj.phase_error_ps.size() == 501);
    for (double v : traj.phase_error_ps) CHECK(v == 0.0);
}

TEST_CASE("trajectories are deterministic per spec and seed") {
    ClockSpec spec = ClockSpec::quartz(42);
    const auto a = synthesize_trajectory(spec, 2.0, 1e-3);
    const auto b = synthesize_trajectory(spec, 2.0, 1e-3);
    CHECK(a.phase_error_ps == b.phase_error_ps);
    spec.seed = 43;
    const auto c = synthesize_trajectory(spec, 2.0, 1e-3);
    CHECK(a.phase_error_ps != c.phase_error_ps);
}

TEST_CASE("white FM amplitude is reproduced by first differences") {
    ClockSpec spec = bare_spec();
    spec.white_fm_amp = 3e-10;
    spec.seed = 17;
    const double tau0 = 1e-3;
    const auto traj = synthesize_trajectory(spec, 1000.0, tau0); // 1e6 samples
    const auto& x = traj.phase_error_ps;
    REQUIRE(x.size() > 1'000'000);
    // Per-sample fractional frequency y_k = (x_{k+1} - x_k) / tau0.
    double sum = 0.0, sum2 = 0.0;
    const double n = double(x.size() - 1);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double y = (x[i + 1] - x[i]) * 1e-12 / tau0;
        sum += y;
        sum2 += y * y;
    }
    const double std = std::sqrt(sum2 / n - (sum / n) * (sum / n));
    CHECK(std == doctest::Approx(spec.white_fm_amp).epsilon(0.05));
}

TEST_CASE("white FM Allan deviation falls as the square root of tau") {
    ClockSpec spec = bare_spec();
    spec.white_fm_amp = 3e-10;
    spec.seed = 31;
    const auto series = to_series(synthesize_trajectory(spec, 1000.0, 1e-3));
    std::vector<double> taus;
    for (int m = 1; m <= 100; m *= 2) taus.push_back(m * 1e-3); // two decades
    const auto curve = oadev(series, taus);
    const auto noise = identify_noise(curve);
    CHECK(noise.exponent == doctest::Approx(-0.5).epsilon(0.2)); // -0.5 +- 0.1
    CHECK(std::abs(noise.exponent + 0.5) < 0.1);
    // Closed form: sigma_y(m*tau0) = amp / sqrt(m).
    CHECK(curve.values.front() == doctest::Approx(3e-10).epsilon(0.1));
    CHECK(curve.values[5] == doctest::Approx(3e-10 / std::sqrt(32.0)).epsilon(0.1));
}

TEST_CASE("rubidium preset sits at its modified Allan plateau") {
    const auto spec = ClockSpec::rubidium(11);
    const auto series = to_series(synthesize_trajectory(spec, 300.0, 1e-3));
    const auto curve = mdev(series, {1.0});
    REQUIRE(curve.values.size() == 1);
    // 3e-12 at 1 s, within a factor 2.
    CHECK(curve.values[0] > 1.5e-12);
    CHECK(curve.values[0] < 6e-12);
}

TEST_CASE("local and true time invert each other") {
    auto spec = ClockSpec::quartz(3);
    spec.fractional_offset = 1.2e-5;
    ClockModel clk(spec, 10.0);
    for (TimeTagPs t : {TimeTagPs(50'000), TimeTagPs(4'000'000'000'000), TimeTagPs(9'900'000'000'000)}) {
        const TimeTagPs local = clk.local_time(t);
        CHECK(std::abs(clk.true_time(local) - t) <= 1);
    }
}

TEST_CASE("queries beyond the materialized span throw") {
    ClockModel clk(ClockSpec::quartz(1), 1.0);
    CHECK_THROWS_AS(clk.time_error_ps(TimeTagPs(5e12)), RangeError);
}

TEST_CASE("non-finite clock parameters are rejected") {
    ClockSpec spec;
    spec.fractional_offset = std::nan("");
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    ClockSpec spec2;
    spec2.white_fm_amp = -1.0;
    CHECK_THROWS_AS(spec2.validate(), ValidationError);
    ClockSpec spec3;
    spec3.sample_interval_s = 0.0;
    CHECK_THROWS_AS(spec3.validate(), ValidationError);
}
