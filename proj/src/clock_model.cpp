#include "pulsesync/clock_model.hpp"

#include <cmath>
#include <random>

#include "pulsesync/errors.hpp"
#include "pulsesync/rng.hpp"

namespace psync {

namespace {

constexpr double kPsPerS = 1e12;

// Maps the requested flat deviation level to the per-pole amplitude of the
// filter bank in synthesize_trajectory. Calibrated on 400 s synthetic runs
// so the modified Allan deviation plateau equals flicker_fm_amp; the
// plateau is flat to ~5% between 0.1 s and 10 s.
constexpr double kFlickerPoleAmp = 0.92;

} // namespace

ClockSpec ClockSpec::ideal() { return ClockSpec{}; }

ClockSpec ClockSpec::quartz(std::uint64_t seed) {
    ClockSpec s;
    s.kind = ClockKind::Quartz;
    s.white_fm_amp = 3e-10;
    // A quartz pair with opposite-sign drift accumulates a relative
    // frequency change of 15 ns/s per minute, 75 ns/s over a 5-minute
    // session.
    s.linear_drift_rate = 1.25e-10;
    s.seed = seed;
    return s;
}

ClockSpec ClockSpec::rubidium(std::uint64_t seed) {
    ClockSpec s;
    s.kind = ClockKind::Rubidium;
    s.white_fm_amp = 8e-13;
    s.flicker_fm_amp = 3e-12;
    s.seed = seed;
    return s;
}

void ClockSpec::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(fractional_offset) || !finite(linear_drift_rate) || !finite(white_fm_amp) ||
        !finite(random_walk_fm_amp) || !finite(flicker_fm_amp) || !finite(sample_interval_s))
        throw ValidationError("clock spec contains non-finite values");
    if (white_fm_amp < 0 || random_walk_fm_amp < 0 || flicker_fm_amp < 0)
        throw ValidationError("clock noise amplitudes must be non-negative");
    if (sample_interval_s <= 0)
        throw ValidationError("clock sample interval must be positive");
    if (kind == ClockKind::Ideal &&
        (fractional_offset != 0 || linear_drift_rate != 0 || has_noise()))
        throw ValidationError("ideal clock must have zero offset, drift and noise");
    if (kind == ClockKind::Quartz && std::abs(fractional_offset) > 2.00001e-5)
        throw ValidationError("quartz offset outside the +-20 ppm sweep range");
    if (std::abs(fractional_offset) > 1e-2 || std::abs(linear_drift_rate) > 1e-2)
        throw ValidationError("clock offset/drift out of plausible range");
}

PhaseTrajectory synthesize_trajectory(const ClockSpec& spec, double duration_s,
                                      double sample_interval_s) {
    spec.validate();
    if (!(duration_s > 0) || !std::isfinite(duration_s))
        throw ValidationError("trajectory duration must be positive");
    if (!(sample_interval_s > 0) || !std::isfinite(sample_interval_s))
        throw ValidationError("trajectory sample interval must be positive");

    const double tau0 = sample_interval_s;
    const auto n = static_cast<std::size_t>(std::floor(duration_s / tau0)) + 1;
    PhaseTrajectory traj;
    traj.sample_interval_s = tau0;
    traj.phase_error_ps.assign(n, 0.0);
    if (!spec.has_noise()) return traj;

    std::mt19937_64 gen(derive_seed(spec.seed, 0x11));
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Flicker FM from a bank of first-order low-pass filtered white noise,
    // poles spaced a factor 10^(1/3) apart. Each pole is started from its
    // stationary distribution so the process has no warm-up transient.
    std::vector<double> rho, pole_gain, pole_state;
    if (spec.flicker_fm_amp > 0) {
        const double f_nyq = 0.5 / tau0;
        double f_low = 1.0 / (duration_s + tau0);
        if (f_low > f_nyq / 10) f_low = f_nyq / 10;
        const double amp = kFlickerPoleAmp * spec.flicker_fm_amp;
        for (double f = f_low; f <= f_nyq; f *= std::pow(10.0, 1.0 / 3.0)) {
            const double r = std::exp(-2.0 * M_PI * f * tau0);
            rho.push_back(r);
            pole_gain.push_back(amp * std::sqrt(1.0 - r * r));
            pole_state.push_back(amp * gauss(gen));
        }
    }

    double x_ps = 0.0;
    double y_rw = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        traj.phase_error_ps[k] = x_ps;
        double y = 0.0;
        if (spec.white_fm_amp > 0) y += spec.white_fm_amp * gauss(gen);
        if (spec.random_walk_fm_amp > 0) {
            y_rw += spec.random_walk_fm_amp * gauss(gen);
            y += y_rw;
        }
        for (std::size_t j = 0; j < rho.size(); ++j) {
            pole_state[j] = rho[j] * pole_state[j] + pole_gain[j] * gauss(gen);
            y += pole_state[j];
        }
        x_ps += y * tau0 * kPsPerS;
    }
    return traj;
}

ClockModel::ClockModel(const ClockSpec& spec, double duration_s) : spec_(spec), duration_s_(duration_s) {
    spec_.validate();
    if (!(duration_s >= 0) || !std::isfinite(duration_s))
        throw ValidationError("clock duration must be non-negative");
    if (!spec_.has_noise()) return;
    // Slack past the nominal end: offset/drift shift the local timescale, and
    // true_time() must be able to evaluate there.
    const double slack = duration_s * 1e-4 + 10 * spec_.sample_interval_s + 1e-6;
    traj_ = synthesize_trajectory(spec_, duration_s + slack, spec_.sample_interval_s);
}

double ClockModel::noise_ps(double t_ps) const {
    if (traj_.phase_error_ps.empty()) return 0.0;
    const double tau0_ps = traj_.sample_interval_s * kPsPerS;
    const double u = t_ps / tau0_ps;
    if (u <= 0) return 0.0;
    if (u > static_cast<double>(traj_.phase_error_ps.size() - 1))
        throw RangeError("time outside materialized clock trajectory");
    auto k = static_cast<std::size_t>(u);
    if (k >= traj_.phase_error_ps.size() - 1) k = traj_.phase_error_ps.size() - 2;
    const double frac = u - static_cast<double>(k);
    return traj_.phase_error_ps[k] +
           frac * (traj_.phase_error_ps[k + 1] - traj_.phase_error_ps[k]);
}

double ClockModel::error_ps_at(double t_ps) const {
    const double t_s = t_ps / kPsPerS;
    const double det_s =
        spec_.fractional_offset * t_s + 0.5 * spec_.linear_drift_rate * t_s * t_s;
    return det_s * kPsPerS + noise_ps(t_ps);
}

double ClockModel::time_error_ps(TimeTagPs t) const {
    return error_ps_at(static_cast<double>(t));
}

TimeTagPs ClockModel::local_time(TimeTagPs t) const {
    return t + static_cast<TimeTagPs>(std::llround(time_error_ps(t)));
}

TimeTagPs ClockModel::true_time(TimeTagPs local) const {
    double t = static_cast<double>(local);
    for (int i = 0; i < 4; ++i) t = static_cast<double>(local) - error_ps_at(t);
    return static_cast<TimeTagPs>(std::llround(t));
}

} // namespace psync
