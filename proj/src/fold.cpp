#include "pulsesync/fold.hpp"

#include <cmath>

#include "pulsesync/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace psync {

FoldRational FoldRational::from_frequency_per_ps(double f) {
    if (!(f > 0) || !std::isfinite(f))
        throw ValidationError("fold frequency must be positive and finite");
    int exp = 0;
    std::frexp(f, &exp); // f = m * 2^exp, m in [0.5, 1)
    int shift = 53 - exp;
    if (shift > 64) shift = 64; // keep the wrap of negative tags exact
    if (shift < 1)
        throw ValidationError("fold frequency too large for integer phase arithmetic");
    FoldRational r;
    r.shift = shift;
    r.mant = static_cast<std::uint64_t>(std::llround(std::ldexp(f, shift)));
    if (r.mant == 0)
        throw ValidationError("fold frequency too small for integer phase arithmetic");
    r.period_ps = 1.0 / r.frequency_per_ps();
    return r;
}

double FoldRational::frequency_per_ps() const {
    return std::ldexp(static_cast<double>(mant), -shift);
}

double FoldRational::phase01(TimeTagPs t) const {
    const unsigned __int128 prod =
        static_cast<unsigned __int128>(mant) * static_cast<std::uint64_t>(t);
    std::uint64_t frac_bits;
    if (shift >= 64) {
        frac_bits = static_cast<std::uint64_t>(prod);
    } else {
        frac_bits = static_cast<std::uint64_t>(prod) & ((std::uint64_t{1} << shift) - 1);
    }
    return std::ldexp(static_cast<double>(frac_bits), -shift);
}

FoldRational FoldRational::scaled(double factor) const {
    return from_frequency_per_ps(frequency_per_ps() * factor);
}

double circular_diff(double a, double b, double period) {
    double d = std::fmod(a - b, period);
    if (d <= -period / 2) d += period;
    if (d > period / 2) d -= period;
    return d;
}

double positive_mod(double value, double period) {
    double m = std::fmod(value, period);
    if (m < 0) m += period;
    return m;
}

namespace {

std::size_t bin_count(const FoldRational& fold, double bin_ps) {
    if (!(bin_ps > 0) || !std::isfinite(bin_ps))
        throw ValidationError("histogram bin width must be positive");
    return static_cast<std::size_t>(std::ceil(fold.period_ps / bin_ps));
}

// Integer-ps tags fold onto bin boundaries whenever the period is close to
// integer, and the represented frequency differs from the nominal one by a
// relative ~1e-17, so a boundary value can come out as k - 1e-9. The nudge
// (a fraction of a bin far below the data resolution) keeps such values in
// bin k without affecting genuinely interior values.
constexpr double kBinEdgeNudge = 1e-7;

inline std::size_t bin_of(const FoldRational& fold, TimeTagPs t, TimeTagPs reference,
                          double inv_bin, std::size_t n_bins) {
    const double folded = fold.fold_ps(t - reference);
    auto idx = static_cast<std::size_t>(folded * inv_bin + kBinEdgeNudge);
    return idx < n_bins ? idx : n_bins - 1;
}

} // namespace

std::vector<double> fold_modulo(const TimeTagPs* tags, std::size_t n, const FoldRational& fold,
                                TimeTagPs reference) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fold.fold_ps(tags[i] - reference);
    return out;
}

std::vector<std::uint64_t> build_histogram(const std::vector<double>& folded, double period_ps,
                                           double bin_ps) {
    if (!(bin_ps > 0) || !std::isfinite(bin_ps))
        throw ValidationError("histogram bin width must be positive");
    if (!(period_ps > 0) || !std::isfinite(period_ps))
        throw ValidationError("histogram period must be positive");
    const auto n_bins = static_cast<std::size_t>(std::ceil(period_ps / bin_ps));
    std::vector<std::uint64_t> hist(n_bins, 0);
    const double inv_bin = 1.0 / bin_ps;
    for (double v : folded) {
        if (v < 0 || v >= period_ps)
            throw ValidationError("folded value outside [0, period)");
        auto idx = static_cast<std::size_t>(v * inv_bin + kBinEdgeNudge);
        ++hist[idx < n_bins ? idx : n_bins - 1];
    }
    return hist;
}

std::vector<std::uint64_t> fold_histogram_serial(const TimeTagPs* tags, std::size_t n,
                                                 const FoldRational& fold, TimeTagPs reference,
                                                 double bin_ps) {
    const std::size_t n_bins = bin_count(fold, bin_ps);
    std::vector<std::uint64_t> hist(n_bins, 0);
    const double inv_bin = 1.0 / bin_ps;
    for (std::size_t i = 0; i < n; ++i)
        ++hist[bin_of(fold, tags[i], reference, inv_bin, n_bins)];
    return hist;
}

std::vector<std::uint64_t> fold_histogram(const TimeTagPs* tags, std::size_t n,
                                          const FoldRational& fold, TimeTagPs reference,
                                          double bin_ps) {
    const std::size_t n_bins = bin_count(fold, bin_ps);
    std::vector<std::uint64_t> hist(n_bins, 0);
    fold_histogram_accumulate(hist, tags, n, fold, reference, bin_ps);
    return hist;
}

void fold_histogram_accumulate(std::vector<std::uint64_t>& hist, const TimeTagPs* tags,
                               std::size_t n, const FoldRational& fold, TimeTagPs reference,
                               double bin_ps) {
    const std::size_t n_bins = bin_count(fold, bin_ps);
    if (hist.size() != n_bins)
        throw ValidationError("histogram size does not match fold period and bin width");
    const double inv_bin = 1.0 / bin_ps;
#ifdef _OPENMP
#pragma omp parallel
    {
        std::vector<std::uint64_t> local(n_bins, 0);
#pragma omp for nowait
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
            ++local[bin_of(fold, tags[i], reference, inv_bin, n_bins)];
#pragma omp critical
        for (std::size_t b = 0; b < n_bins; ++b) hist[b] += local[b];
    }
#else
    for (std::size_t i = 0; i < n; ++i)
        ++hist[bin_of(fold, tags[i], reference, inv_bin, n_bins)];
#endif
}

} // namespace psync
