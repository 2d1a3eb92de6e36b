// Timing comparison of the serial reference kernels against their OpenMP
// variants: histogram folding and the frequency sweep. Both pairs are
// bit-identical by construction; this only measures throughput.
//
// Usage: bench_kernels [n_tags] [repeats]

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pulsesync/fold.hpp"
#include "pulsesync/sweep.hpp"
#include "pulsesync/types.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Tags of a pulsed source seen through a slightly detuned receiver clock:
// multiples of the period, thinned, time-scaled by (1 + du), with Gaussian
// jitter. Matches what the sweep sees in production.
std::vector<psync::TimeTagPs> make_tags(std::size_t n, double period_ps, double du,
                                        double jitter_ps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::geometric_distribution<std::uint64_t> gap(0.01);
    std::normal_distribution<double> jitter(0.0, jitter_ps);
    std::vector<psync::TimeTagPs> tags;
    tags.reserve(n);
    std::uint64_t pulse = 0;
    while (tags.size() < n) {
        pulse += 1 + gap(rng);
        const double t = static_cast<double>(pulse) * period_ps * (1.0 + du) + jitter(rng);
        tags.push_back(static_cast<psync::TimeTagPs>(t));
    }
    return tags;
}

template <typename F> double best_of(int repeats, F&& body) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = Clock::now();
        body();
        const double dt = seconds_since(t0);
        if (dt < best) best = dt;
    }
    return best;
}

void report(const char* name, std::size_t n, double serial_s, double parallel_s) {
    std::printf("%-18s n=%-10zu serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n", name, n,
                serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s);
}

} // namespace

int main(int argc, char** argv) {
    std::size_t n_tags = 10'000'000;
    int repeats = 3;
    if (argc > 1) n_tags = std::strtoull(argv[1], nullptr, 10);
    if (argc > 2) repeats = std::atoi(argv[2]);

#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled; parallel variants run serially\n");
#endif

    const double period_ps = 2000.0;
    const double f_c_hz = 1.0 / (period_ps * 1e-12);
    const auto fold = psync::FoldRational::from_period_ps(period_ps);

    // Histogram folding: one pass over a large stream.
    const auto tags = make_tags(n_tags, period_ps, 3e-7, 40.0, 42);
    std::vector<std::uint64_t> hist;
    const double hist_serial = best_of(repeats, [&] {
        hist = psync::fold_histogram_serial(tags.data(), tags.size(), fold, 0, 1.0);
    });
    std::vector<std::uint64_t> hist_par;
    const double hist_parallel = best_of(repeats, [&] {
        hist_par = psync::fold_histogram(tags.data(), tags.size(), fold, 0, 1.0);
    });
    if (hist != hist_par) {
        std::fprintf(stderr, "FATAL: parallel histogram differs from serial reference\n");
        return 1;
    }
    report("fold_histogram", n_tags, hist_serial, hist_parallel);

    // Frequency sweep: many independent fold+fit trials over a short
    // acquisition. +-1 ppm at the production step keeps the bench at a few
    // thousand trials.
    const std::size_t n_acq = std::min<std::size_t>(n_tags, 30'000);
    const auto acq = make_tags(n_acq, period_ps, 3e-7, 40.0, 43);
    psync::SweepParams params;
    params.range = 1e-6;
    params.step = 5e-10;
    psync::SweepResult serial_result, parallel_result;
    const double sweep_serial = best_of(1, [&] {
        serial_result = psync::frequency_sweep_serial(acq.data(), acq.size(), f_c_hz, params);
    });
    const double sweep_parallel = best_of(1, [&] {
        parallel_result = psync::frequency_sweep(acq.data(), acq.size(), f_c_hz, params);
    });
    if (serial_result.best_index != parallel_result.best_index) {
        std::fprintf(stderr, "FATAL: parallel sweep picked a different trial\n");
        return 1;
    }
    report("frequency_sweep", n_acq, sweep_serial, sweep_parallel);
    std::printf("sweep best offset %.3g (significance %.1f)\n", serial_result.best_offset,
                serial_result.best_fit.significance);
    return 0;
}
