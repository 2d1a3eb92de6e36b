#include "pulsesync/peak_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pulsesync/errors.hpp"
#include "pulsesync/fold.hpp"
#include "pulsesync/significance.hpp"

namespace psync {

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

// Solves a 4x4 linear system in place, Gaussian elimination with partial
// pivoting. Returns false on a singular matrix.
bool solve4(double a[4][4], double b[4]) {
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-300) return false;
        if (pivot != col) {
            for (int c = 0; c < 4; ++c) std::swap(a[col][c], a[pivot][c]);
            std::swap(b[col], b[pivot]);
        }
        for (int r = col + 1; r < 4; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (int col = 3; col >= 0; --col) {
        double s = b[col];
        for (int c = col + 1; c < 4; ++c) s -= a[col][c] * b[c];
        b[col] = s / a[col][col];
    }
    return true;
}

struct WindowPoint {
    double x; // bin center, ps
    double y; // counts
};

double sse_of(const std::vector<WindowPoint>& pts, double A, double c, double sigma, double B,
              double period) {
    double sse = 0.0;
    for (const auto& p : pts) {
        const double d = circular_diff(p.x, c, period);
        const double m = A * std::exp(-0.5 * d * d / (sigma * sigma)) + B;
        sse += (p.y - m) * (p.y - m);
    }
    return sse;
}

PeakFit fit_impl(const std::vector<std::uint64_t>& hist, double bin_ps, double period_ps,
                 bool restrict_argmax, double expected_center_ps, double max_dev_ps) {
    PeakFit out;
    const std::size_t n = hist.size();
    if (n == 0) return out;

    double total = 0.0;
    std::size_t peak_idx = 0;
    std::uint64_t peak_val = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total += static_cast<double>(hist[i]);
        if (restrict_argmax) {
            const double x = (static_cast<double>(i) + 0.5) * bin_ps;
            if (std::abs(circular_diff(x, expected_center_ps, period_ps)) > max_dev_ps) continue;
        }
        if (hist[i] > peak_val) {
            peak_val = hist[i];
            peak_idx = i;
        }
    }
    if (total == 0.0 || peak_val == 0) return out;

    // Flatness gate: a real peak must exceed the mean by several Poisson
    // standard deviations, otherwise report that nothing was found.
    const double mean = total / static_cast<double>(n);
    if (static_cast<double>(peak_val) - mean <= 5.0 * std::sqrt(std::max(mean, 1.0)))
        return out;
    out.found = true;

    std::vector<double> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<double>(hist[i]);
    const double baseline0 = median_of(all);

    // Seed the center and width from a lightly smoothed histogram.  A peak
    // broadened by uncorrected drift turns into a low flat-top whose single
    // highest bin is just a Poisson spike; walking out from that raw bin at
    // half its height stops after one bin and the fit collapses onto the
    // spike.  A 3-bin boxcar suppresses such spikes while leaving genuine
    // peaks (sigma >= bin) essentially unchanged; the fit itself still runs
    // on the raw counts.
    std::vector<double> smooth(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = static_cast<double>(hist[(i + n - 1) % n]);
        const double b = static_cast<double>(hist[i]);
        const double c = static_cast<double>(hist[(i + 1) % n]);
        smooth[i] = (a + b + c) / 3.0;
    }
    double smooth_peak = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (restrict_argmax) {
            const double x = (static_cast<double>(i) + 0.5) * bin_ps;
            if (std::abs(circular_diff(x, expected_center_ps, period_ps)) > max_dev_ps) continue;
        }
        if (smooth[i] > smooth_peak) {
            smooth_peak = smooth[i];
            peak_idx = i;
        }
    }

    // Half-maximum walk outwards from the peak gives a coarse width.
    const double half = baseline0 + 0.5 * (smooth_peak - baseline0);
    std::size_t left = 0, right = 0;
    while (left + right + 1 < n) {
        const std::size_t li = (peak_idx + n - left - 1) % n;
        if (smooth[li] < half) break;
        ++left;
    }
    while (left + right + 1 < n) {
        const std::size_t ri = (peak_idx + right + 1) % n;
        if (smooth[ri] < half) break;
        ++right;
    }
    const double fwhm_ps = static_cast<double>(left + right + 1) * bin_ps;
    double sigma0 = std::max(fwhm_ps / 2.355, bin_ps / 2.355);
    sigma0 = std::min(sigma0, period_ps / 4.0);
    const double center0 = (static_cast<double>(peak_idx) + 0.5) * bin_ps;

    // Collect bins within +-5 sigma of the coarse center (circular).
    auto window_bins = static_cast<std::size_t>(std::ceil(5.0 * sigma0 / bin_ps));
    std::size_t w_lo = window_bins, w_hi = window_bins;
    if (2 * window_bins + 1 >= n) {
        w_lo = n / 2;
        w_hi = n - 1 - w_lo;
    }
    std::vector<WindowPoint> pts;
    pts.reserve(w_lo + w_hi + 1);
    std::vector<char> in_window(n, 0);
    for (std::size_t k = 0; k <= w_lo + w_hi; ++k) {
        const std::size_t i = (peak_idx + n - w_lo + k) % n;
        in_window[i] = 1;
        // Unwrapped coordinate keeps the window contiguous around center0.
        const double x = center0 + (static_cast<double>(k) - static_cast<double>(w_lo)) * bin_ps;
        pts.push_back({x, static_cast<double>(hist[i])});
    }

    // Robust background spread from the bins outside the window.
    std::vector<double> off;
    off.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!in_window[i]) off.push_back(static_cast<double>(hist[i]));
    if (off.size() >= 8) {
        const double med = median_of(off);
        std::vector<double> dev(off.size());
        for (std::size_t i = 0; i < off.size(); ++i) dev[i] = std::abs(off[i] - med);
        out.bg_std = 1.4826 * median_of(dev);
    }
    if (out.bg_std <= 0.0) out.bg_std = std::sqrt(std::max(baseline0, 1.0));

    // Levenberg-Marquardt on [A, c, sigma, B].
    double A = std::max(static_cast<double>(peak_val) - baseline0, 1.0);
    double c = center0;
    double sigma = sigma0;
    double B = std::max(baseline0, 0.0);
    double lambda = 1e-3;
    double sse = sse_of(pts, A, c, sigma, B, period_ps);
    bool converged = false;
    for (int iter = 0; iter < 60; ++iter) {
        double jtj[4][4] = {};
        double jtr[4] = {};
        for (const auto& p : pts) {
            const double d = circular_diff(p.x, c, period_ps);
            const double e = std::exp(-0.5 * d * d / (sigma * sigma));
            const double m = A * e + B;
            const double r = p.y - m;
            const double j[4] = {e, A * e * d / (sigma * sigma),
                                 A * e * d * d / (sigma * sigma * sigma), 1.0};
            for (int a = 0; a < 4; ++a) {
                jtr[a] += j[a] * r;
                for (int b = 0; b < 4; ++b) jtj[a][b] += j[a] * j[b];
            }
        }
        bool stepped = false;
        for (int attempt = 0; attempt < 8 && !stepped; ++attempt) {
            double m[4][4];
            double rhs[4] = {jtr[0], jtr[1], jtr[2], jtr[3]};
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b)
                    m[a][b] = jtj[a][b] + (a == b ? lambda * std::max(jtj[a][a], 1e-12) : 0.0);
            if (!solve4(m, rhs)) {
                lambda *= 10.0;
                continue;
            }
            double A2 = A + rhs[0];
            double c2 = c + rhs[1];
            double s2 = sigma + rhs[2];
            double B2 = B + rhs[3];
            s2 = std::clamp(s2, bin_ps / 4.0, period_ps / 2.0);
            const double sse2 = sse_of(pts, A2, c2, s2, B2, period_ps);
            if (sse2 <= sse) {
                const bool small_step = std::abs(rhs[1]) < 1e-4 * bin_ps &&
                                        sse - sse2 <= 1e-10 * std::max(sse, 1.0);
                A = A2;
                c = c2;
                sigma = s2;
                B = B2;
                sse = sse2;
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                if (small_step) converged = true;
            } else {
                lambda *= 10.0;
            }
        }
        if (!stepped || converged) {
            converged = converged || (stepped && iter > 0);
            break;
        }
    }

    // Degeneracy guards: when the center drifts beyond the fitted window the
    // model touches no data point and the amplitude decouples from the SSE,
    // so a "converged" solution can claim an arbitrarily tall spike in the
    // gap. Keep the center inside the window and the amplitude within reach
    // of the tallest observed bin (a sub-bin peak split across two bins can
    // legitimately fit a little over twice the max count).
    const double window_span_ps = (static_cast<double>(w_lo) + 0.5) * bin_ps;
    const bool sane = converged && A > 0 && sigma > 0 && sigma < period_ps / 2.0 &&
                      std::abs(circular_diff(c, center0, period_ps)) <= window_span_ps &&
                      std::abs(circular_diff(c, center0, period_ps)) < period_ps / 4.0 &&
                      A <= 4.0 * (static_cast<double>(peak_val) + 1.0);
    if (sane) {
        out.fit_converged = true;
        out.center_ps = positive_mod(c, period_ps);
        out.sigma_ps = sigma;
        out.amplitude = A;
        out.baseline = B;
        out.signal_area = out.amplitude * out.sigma_ps * std::sqrt(2.0 * M_PI) / bin_ps;
    } else {
        // Moment fallback: baseline-subtracted weighted mean and spread over
        // the window, measured relative to the coarse center. The Gaussian
        // model is degenerate for peaks at or below one bin (any sub-bin
        // sigma predicts the same counts), which is where the solver lands
        // on jitter-free streams.
        double wsum = 0.0, dsum = 0.0;
        for (const auto& p : pts) {
            const double w = std::max(p.y - baseline0, 0.0);
            wsum += w;
            dsum += w * (p.x - center0);
        }
        const double dbar = wsum > 0 ? dsum / wsum : 0.0;
        double vsum = 0.0;
        for (const auto& p : pts) {
            const double w = std::max(p.y - baseline0, 0.0);
            vsum += w * (p.x - center0 - dbar) * (p.x - center0 - dbar);
        }
        out.fit_converged = false;
        out.center_ps = positive_mod(center0 + dbar, period_ps);
        // Binning floors the observable width at bin/sqrt(12); without it a
        // single-bin peak would report zero area and lose the sweep to any
        // broad smear artifact.
        out.sigma_ps = std::max(wsum > 0 ? std::sqrt(vsum / wsum) : sigma0,
                                bin_ps / std::sqrt(12.0));
        out.amplitude = std::max(static_cast<double>(peak_val) - baseline0, 0.0);
        out.baseline = baseline0;
        out.signal_area = wsum; // excess counts in the window, no model needed
    }
    out.significance = fit_significance(out, bin_ps);
    return out;
}

} // namespace

PeakFit try_fit_peak(const std::vector<std::uint64_t>& hist, double bin_ps, double period_ps) {
    return fit_impl(hist, bin_ps, period_ps, false, 0.0, 0.0);
}

PeakFit try_fit_peak_near(const std::vector<std::uint64_t>& hist, double bin_ps, double period_ps,
                          double expected_center_ps, double max_dev_ps) {
    return fit_impl(hist, bin_ps, period_ps, true, expected_center_ps, max_dev_ps);
}

PeakFit fit_peak(const std::vector<std::uint64_t>& hist, double bin_ps, double period_ps) {
    PeakFit fit = try_fit_peak(hist, bin_ps, period_ps);
    if (!fit.found) throw NoPeakError("histogram has no peak above the background");
    return fit;
}

} // namespace psync
