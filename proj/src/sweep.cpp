#include "pulsesync/sweep.hpp"

#include <cmath>

#include "pulsesync/errors.hpp"
#include "pulsesync/fold.hpp"

namespace psync {

namespace {

SweepResult sweep_impl(const TimeTagPs* tags, std::size_t n, double f_c_hz,
                       const SweepParams& params, bool parallel) {
    if (n == 0) throw ValidationError("frequency sweep needs a nonempty tag stream");
    if (!(params.step > 0) || !(params.range >= 0))
        throw ValidationError("sweep step must be positive and range non-negative");

    const auto half = static_cast<std::int64_t>(std::floor(params.range / params.step + 1e-9));
    const std::size_t n_trials = static_cast<std::size_t>(2 * half + 1);
    SweepResult res;
    res.grid.resize(n_trials);
    res.significances.resize(n_trials);
    for (std::size_t k = 0; k < n_trials; ++k)
        res.grid[k] = (static_cast<std::int64_t>(k) - half) * params.step;

    // Folding relative to the first tag keeps the in-window phase small for
    // every trial frequency.
    const TimeTagPs ref = tags[0];

#pragma omp parallel for schedule(dynamic, 16) if (parallel)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n_trials); ++k) {
        const FoldRational fold =
            FoldRational::from_frequency_hz(f_c_hz * (1.0 + res.grid[static_cast<std::size_t>(k)]));
        const auto hist = fold_histogram_serial(tags, n, fold, ref, params.bin_ps);
        const PeakFit fit = try_fit_peak(hist, params.bin_ps, fold.period_ps);
        res.significances[static_cast<std::size_t>(k)] = fit.found ? fit.significance : 0.0;
    }

    std::size_t best = 0;
    for (std::size_t k = 1; k < n_trials; ++k)
        if (res.significances[k] > res.significances[best]) best = k;
    res.best_index = best;
    res.best_offset = res.grid[best];
    {
        const FoldRational fold =
            FoldRational::from_frequency_hz(f_c_hz * (1.0 + res.best_offset));
        const auto hist = fold_histogram_serial(tags, n, fold, ref, params.bin_ps);
        res.best_fit = try_fit_peak(hist, params.bin_ps, fold.period_ps);
    }

    if (res.significances[best] < params.s_threshold)
        throw SweepFailedError("no sweep trial reached the significance threshold",
                               std::move(res));
    return res;
}

} // namespace

SweepResult frequency_sweep(const TimeTagPs* tags, std::size_t n, double f_c_hz,
                            const SweepParams& params) {
    return sweep_impl(tags, n, f_c_hz, params, true);
}

SweepResult frequency_sweep_serial(const TimeTagPs* tags, std::size_t n, double f_c_hz,
                                   const SweepParams& params) {
    return sweep_impl(tags, n, f_c_hz, params, false);
}

} // namespace psync
