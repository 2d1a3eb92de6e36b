#pragma once

#include <cstdint>
#include <vector>

#include "pulsesync/fold.hpp"
#include "pulsesync/peak_fit.hpp"
#include "pulsesync/sweep.hpp"
#include "pulsesync/types.hpp"

namespace psync {

struct TrackerParams {
    double f_c_nominal_hz = 500e6;
    double update_time_s = 0.15;    // feedback window T_f
    double acquisition_time_s = 0.1;
    double bin_ps = 1.0;
    double corr_window_ps = 39.0;   // tags this close to the peak count as correlated
    double qber_slip_threshold = 0.4;
    double qber_accept = 0.1;       // slip candidate acceptance
    int slip_k_max = 3;             // tries offset +-k periods up to this k
    SweepParams sweep;

    void validate() const;
};

// Live tracking state. The tracker is always positioned at the start of the
// next update window: window_start_ps is that window's fold reference,
// predicted_offset_ps the expected peak phase there, and seq_index0 the
// symbol-sequence index of the pulse at phase predicted_offset_ps in the
// window's first period.
struct TrackerState {
    FoldRational f_c_estimate;
    double freq_diff = 0.0;           // cumulative fractional correction vs nominal
    double delta_u = 0.0;             // last applied correction
    double relative_offset_ps = 0.0;  // fitted peak phase, [0, period)
    double absolute_offset_ps = 0.0;  // accumulated timing-offset record
    double init_qber = 0.0;           // error rate at the accepted initial alignment
    std::int64_t seq_index0 = 0;
    TimeTagPs window_start_ps = 0;
    double predicted_offset_ps = 0.0;
    double a_priori_jitter_ps = 0.0;
    double a_posteriori_jitter_ps = 0.0;
    std::uint64_t updates = 0;
    std::vector<std::pair<double, double>> offset_buffer; // (time_s, offset_ps)
};

// One per-window record, in the order the fields appear in the session CSV.
struct TrackUpdate {
    double time_s = 0.0;        // window end, receiver timescale
    double delta_t_ps = 0.0;    // predicted minus measured peak drift
    double delta_u = 0.0;       // applied frequency correction
    double freq_diff = 0.0;     // cumulative correction vs nominal
    double a_priori_sigma_ps = 0.0;
    double a_posteriori_sigma_ps = 0.0;
    double qber = 0.0;
    double significance = 0.0;
    bool slip_recovered = false;
    double corr_rate_cps = 0.0;
};

// Runs sweep, peak fit and the error-rate dip alignment over an acquisition
// window starting at t0_ps. Both half-period peak hypotheses are tried
// because a balanced symbol pattern produces Early and Late peaks of equal
// height and the fit may lock on either. Throws SweepFailedError,
// NoPeakError or AlignmentFailedError on the respective stage.
TrackerState initialize_tracker(const std::vector<TimeTagPs>& acquisition_tags, TimeTagPs t0_ps,
                                const TrackerParams& params, const SymbolSequence& seq);

// Processes one update window (tags in [window_start, window_start + T_f)).
// On a QBER spike or lost peak it attempts slip recovery, reverting that
// window's frequency update; if no candidate alignment passes, throws
// ResyncRequiredError.
TrackUpdate track_update(TrackerState& state, const std::vector<TimeTagPs>& tags,
                         const TrackerParams& params, const SymbolSequence& seq);

// Synchronization jitter added by the tracking itself: the quadrature excess
// of the measured peak width over the static jitter budget.
struct SyncJitterResult {
    double jitter_ps = 0.0;
    bool clamped = false; // measured width fell below the budget
};
SyncJitterResult sync_jitter(double sigma_ps, double sigma0_ps);

} // namespace psync
