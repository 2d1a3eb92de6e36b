#include "pulsesync/tracker.hpp"

#include <cmath>

#include "pulsesync/errors.hpp"
#include "pulsesync/offset_search.hpp"

namespace psync {

namespace {

constexpr double kPsPerS = 1e12;

TimeTagPs span_ps(double seconds, const char* what) {
    const double ps = seconds * kPsPerS;
    const auto i = static_cast<TimeTagPs>(std::llround(ps));
    if (std::abs(ps - static_cast<double>(i)) > 1e-3)
        throw ValidationError(std::string(what) + " must be an integer number of ps");
    return i;
}

std::size_t wrap_seq(std::int64_t v, std::int64_t L) {
    return static_cast<std::size_t>(((v % L) + L) % L);
}

// Sequence-index step between the anchor of the current frame (phase rel,
// reference w) and the anchor of the next frame (phase rel_next, reference
// w + advance).
std::int64_t anchor_step(double advance_ps, double rel, double rel_next, double period) {
    return std::llround((advance_ps + rel_next - rel) / period);
}

double count_correlated(const std::vector<TimeTagPs>& tags, const FoldRational& fold,
                        TimeTagPs reference, double center, double window_ps) {
    std::size_t n = 0;
    for (TimeTagPs t : tags)
        if (std::abs(circular_diff(fold.fold_ps(t - reference), center, fold.period_ps)) <=
            window_ps)
            ++n;
    return static_cast<double>(n);
}

} // namespace

void TrackerParams::validate() const {
    if (!(f_c_nominal_hz > 0)) throw ValidationError("nominal clock rate must be positive");
    if (!(update_time_s >= acquisition_time_s))
        throw ValidationError("update time must be at least the acquisition time");
    if (!(acquisition_time_s > 0)) throw ValidationError("acquisition time must be positive");
    if (!(bin_ps > 0)) throw ValidationError("histogram bin width must be positive");
    if (slip_k_max < 0) throw ValidationError("slip search depth must be non-negative");
}

TrackerState initialize_tracker(const std::vector<TimeTagPs>& acquisition_tags, TimeTagPs t0_ps,
                                const TrackerParams& params, const SymbolSequence& seq) {
    params.validate();
    const SweepResult sweep =
        frequency_sweep(acquisition_tags, params.f_c_nominal_hz, params.sweep);

    TrackerState st;
    st.freq_diff = sweep.best_offset;
    st.f_c_estimate =
        FoldRational::from_frequency_hz(params.f_c_nominal_hz * (1.0 + sweep.best_offset));
    const double P = st.f_c_estimate.period_ps;

    const auto hist =
        fold_histogram(acquisition_tags, st.f_c_estimate, t0_ps, params.bin_ps);
    const PeakFit peak = fit_peak(hist, params.bin_ps, P);

    // The fitted peak may be the Early or the Late bin; resolve by running
    // the dip search for both hypotheses and keeping the deeper dip.
    bool have = false;
    double best_rel = 0.0;
    OffsetSearchResult best{};
    for (int hyp = 0; hyp < 2; ++hyp) {
        const double rel = positive_mod(peak.center_ps - hyp * P / 2, P);
        try {
            OffsetSearchResult r = absolute_offset_search(
                acquisition_tags, seq, static_cast<double>(t0_ps) + rel,
                params.f_c_nominal_hz * (1.0 + sweep.best_offset),
                static_cast<std::int64_t>(seq.size()));
            if (!have || r.min_qber < best.min_qber) {
                have = true;
                best = r;
                best_rel = rel;
            }
        } catch (const AlignmentFailedError&) {
        }
    }
    if (!have)
        throw AlignmentFailedError("no error-rate dip for either half-period hypothesis");

    st.relative_offset_ps = best_rel;
    st.absolute_offset_ps = best_rel + static_cast<double>(best.best_shift) * P;
    st.init_qber = best.min_qber;
    std::int64_t index0 = -best.best_shift;

    // Position the state at the first tracking window.
    const TimeTagPs acq = span_ps(params.acquisition_time_s, "acquisition time");
    st.window_start_ps = t0_ps + acq;
    st.predicted_offset_ps =
        positive_mod(best_rel - st.f_c_estimate.fold_ps(acq), P);
    const std::int64_t step =
        anchor_step(static_cast<double>(acq), best_rel, st.predicted_offset_ps, P);
    st.seq_index0 = static_cast<std::int64_t>(wrap_seq(index0 + step,
                                                       static_cast<std::int64_t>(seq.size())));
    return st;
}

TrackUpdate track_update(TrackerState& state, const std::vector<TimeTagPs>& tags,
                         const TrackerParams& params, const SymbolSequence& seq) {
    params.validate();
    const auto L = static_cast<std::int64_t>(seq.size());
    const TimeTagPs W = span_ps(params.update_time_s, "update time");
    const double W_d = static_cast<double>(W);
    const TimeTagPs w0 = state.window_start_ps;

    const FoldRational f_prev = state.f_c_estimate;
    const double P = f_prev.period_ps;

    const auto hist_a = fold_histogram(tags, f_prev, w0, params.bin_ps);
    const PeakFit fit_a =
        try_fit_peak_near(hist_a, params.bin_ps, P, state.predicted_offset_ps, P / 4);

    TrackUpdate rec;
    rec.time_s = static_cast<double>(w0 + W) / kPsPerS;
    rec.freq_diff = state.freq_diff;

    bool need_recovery = !fit_a.found;
    double delta_t = 0.0;
    FoldRational f_new = f_prev;
    PeakFit fit_p;
    // Slot position of the a-posteriori anchor relative to w0, kept on a
    // linear ladder: it may land slightly outside [0, P) when the peak sits
    // near the fold seam.  Wrapping it into range here would silently pair
    // the anchor with a neighbouring sequence index; the wrap is absorbed
    // into the integer step at the advance below instead.
    double anchor_ps = 0.0;

    if (!need_recovery) {
        delta_t = circular_diff(state.predicted_offset_ps, fit_a.center_ps, P);
        const double delta_u = delta_t / W_d;
        f_new = f_prev.scaled(1.0 + delta_u);

        const auto hist_p = fold_histogram(tags, f_new, w0, params.bin_ps);
        // Refolding at the corrected frequency moves the mid-window phase by
        // about half the measured drift.
        const double guess_lin = state.predicted_offset_ps - delta_t / 2;
        fit_p = try_fit_peak_near(hist_p, params.bin_ps, f_new.period_ps,
                                  positive_mod(guess_lin, f_new.period_ps),
                                  f_new.period_ps / 4);
        if (!fit_p.found) {
            need_recovery = true;
        } else {
            anchor_ps = fit_p.center_ps +
                        f_new.period_ps *
                            std::round((guess_lin - fit_p.center_ps) / f_new.period_ps);
            rec.qber = qber_at_alignment(tags, seq, static_cast<double>(w0) + anchor_ps,
                                         f_new.period_ps, state.seq_index0);
            need_recovery = rec.qber > params.qber_slip_threshold;
            if (!need_recovery) {
                rec.delta_t_ps = delta_t;
                rec.delta_u = delta_u;
                state.delta_u = delta_u;
                state.freq_diff = (1.0 + state.freq_diff) * (1.0 + delta_u) - 1.0;
                rec.freq_diff = state.freq_diff;
                state.absolute_offset_ps -= delta_t;
            }
        }
    }

    if (need_recovery) {
        // Lost peak or error-rate spike: revert this window's frequency
        // update, refit without the prediction window, then scan whole-period
        // shifts and both half-period hypotheses for a working alignment.
        f_new = f_prev;
        const PeakFit refit = try_fit_peak(hist_a, params.bin_ps, P);
        if (!refit.found)
            throw ResyncRequiredError("correlation peak lost and no candidate peak found");
        bool accepted = false;
        for (int kk = 0; kk <= params.slip_k_max && !accepted; ++kk) {
            for (int sign = 1; sign >= -1 && !accepted; sign -= 2) {
                if (kk == 0 && sign < 0) continue;
                const std::int64_t k = static_cast<std::int64_t>(kk) * sign;
                for (int hyp = 0; hyp < 2 && !accepted; ++hyp) {
                    const double rel = positive_mod(refit.center_ps - hyp * P / 2, P);
                    // Evaluate the candidate at the representative nearest
                    // the prediction so a fold-seam wrap is not mistaken for
                    // a whole-period slip.
                    const double raw =
                        rel + P * std::round((state.predicted_offset_ps - rel) / P);
                    const double q = qber_at_alignment(
                        tags, seq, static_cast<double>(w0) + raw, P, state.seq_index0 - k);
                    if (q < params.qber_accept) {
                        accepted = true;
                        rec.slip_recovered = true;
                        rec.qber = q;
                        state.seq_index0 =
                            static_cast<std::int64_t>(wrap_seq(state.seq_index0 - k, L));
                        state.absolute_offset_ps +=
                            static_cast<double>(k) * P + (raw - state.predicted_offset_ps);
                        fit_p = refit;
                        fit_p.center_ps = rel;
                        anchor_ps = raw;
                    }
                }
            }
        }
        if (!accepted)
            throw ResyncRequiredError("no slip candidate recovered a low error rate");
        rec.delta_t_ps = 0.0;
        rec.delta_u = 0.0;
        state.delta_u = 0.0;
    }

    rec.a_priori_sigma_ps = fit_a.found ? fit_a.sigma_ps : fit_p.sigma_ps;
    rec.a_posteriori_sigma_ps = fit_p.sigma_ps;
    rec.significance = fit_p.significance;
    rec.corr_rate_cps = count_correlated(tags, f_new, w0, fit_p.center_ps,
                                         params.corr_window_ps) /
                        params.update_time_s;

    // Advance to the next window.
    const double P_new = f_new.period_ps;
    state.f_c_estimate = f_new;
    state.relative_offset_ps = fit_p.center_ps;
    state.a_priori_jitter_ps = rec.a_priori_sigma_ps;
    state.a_posteriori_jitter_ps = rec.a_posteriori_sigma_ps;
    const double pred_next = positive_mod(anchor_ps - f_new.fold_ps(W), P_new);
    const std::int64_t step = anchor_step(W_d, anchor_ps, pred_next, P_new);
    state.seq_index0 = static_cast<std::int64_t>(wrap_seq(state.seq_index0 + step, L));
    state.predicted_offset_ps = pred_next;
    state.window_start_ps = w0 + W;
    ++state.updates;
    state.offset_buffer.emplace_back(rec.time_s, state.absolute_offset_ps);
    return rec;
}

SyncJitterResult sync_jitter(double sigma_ps, double sigma0_ps) {
    if (sigma_ps < 0 || sigma0_ps < 0 || !std::isfinite(sigma_ps) || !std::isfinite(sigma0_ps))
        throw ValidationError("jitter widths must be non-negative");
    if (sigma_ps < sigma0_ps) return {0.0, true};
    return {std::sqrt(sigma_ps * sigma_ps - sigma0_ps * sigma0_ps), false};
}

} // namespace psync
