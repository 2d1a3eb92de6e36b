// End-to-end acceptance gate. Each numbered check prints one PASS/FAIL line
// with the measured quantities; the process exits nonzero if any fails.
//
// The heavyweight checks (4 and 6) budget minutes, not hours; everything
// else is seconds. Run through ctest or directly.

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "pulsesync/clock_model.hpp"
#include "pulsesync/config.hpp"
#include "pulsesync/fold.hpp"
#include "pulsesync/offset_search.hpp"
#include "pulsesync/peak_fit.hpp"
#include "pulsesync/photon_sim.hpp"
#include "pulsesync/session.hpp"
#include "pulsesync/stability.hpp"
#include "pulsesync/sweep.hpp"
#include "pulsesync/tracker.hpp"
#include "pulsesync/types.hpp"
#include "pulsesync/wire.hpp"
#include "pulsesync/wire_endpoint.hpp"

using namespace psync;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

char detail_buf[512];

// Check 6 runs the long tracked session; check 8 reuses its offset record.
std::vector<std::pair<double, double>> g_tracked_offsets;

// R^2 of the least-squares line through (x, y).
double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y,
                     double* slope = nullptr, double* intercept = nullptr) {
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double a = (sy - b * sx) / n;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (a + b * x[i]);
        ss_res += r * r;
        const double d = y[i] - sy / n;
        ss_tot += d * d;
    }
    if (slope) *slope = b;
    if (intercept) *intercept = a;
    return ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
}

ExperimentConfig ideal_pair_config() {
    auto cfg = default_config();
    cfg.sender_clock = ClockSpec::ideal();
    cfg.receiver_clock = ClockSpec::ideal();
    return cfg;
}

PhaseSeries offsets_to_series(const std::vector<std::pair<double, double>>& buf,
                              const std::string& label) {
    PhaseSeries s;
    s.label = label;
    s.sample_interval_s = (buf.back().first - buf.front().first) / double(buf.size() - 1);
    for (const auto& [t, off] : buf) s.x_s.push_back(off * 1e-12);
    return s;
}

// --- 1. fold vs brute-force pair correlation ---------------------------

bool check_fold_oracle() {
    const auto t_start = Clock::now();
    const TimeTagPs period = 2000;
    bool all_equal = true;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        // One sender pulse per period over 2e4 periods; ~1e4 jittered
        // detections plus uniform background.
        std::mt19937_64 rng(seed);
        std::bernoulli_distribution detect(0.5);
        std::normal_distribution<double> jitter(0.0, 100.0);
        std::uniform_int_distribution<TimeTagPs> bg(0, 20'000 * period - 1);
        const std::int64_t n_periods = 20'000;
        std::vector<TimeTagPs> tags;
        for (std::int64_t k = 1; k + 1 < n_periods; ++k)
            if (detect(rng)) tags.push_back(k * period + std::llround(jitter(rng)));
        for (int i = 0; i < 1000; ++i) tags.push_back(bg(rng));
        std::sort(tags.begin(), tags.end());

        // Brute force: every (tag, sender pulse) pair whose lag falls inside
        // one period contributes.
        std::vector<std::uint64_t> pairs(std::size_t(period), 0);
        for (TimeTagPs t : tags)
            for (std::int64_t k = -1; k <= n_periods; ++k) {
                const TimeTagPs lag = t - k * period;
                if (lag >= 0 && lag < period) ++pairs[std::size_t(lag)];
            }

        const auto fold = FoldRational::from_period_ps(double(period));
        const auto hist = fold_histogram(tags, fold, 0, 1.0);
        all_equal = all_equal && hist == pairs && tags.size() >= 10'000;
    }
    const double dt = seconds_since(t_start);
    std::snprintf(detail_buf, sizeof detail_buf, "3 streams bin-exact, %.1f s", dt);
    return all_equal && dt < 10.0;
}

// --- 2. jitter budget reproduced by the fitted peak --------------------

bool check_jitter_budget() {
    auto cfg = ideal_pair_config();
    cfg.sequence.symbols.assign(100, 'E'); // one clean peak
    cfg.channel.background_rate_cps = 0.0;
    cfg.session.duration_s = 1.0;
    auto sim = cfg.make_simulator();
    const auto stream = sim.run_all();
    const auto fold = FoldRational::from_period_ps(sim.source().pulse_period_ps());
    const auto hist = fold_histogram(stream.tags, fold, 0, 1.0);
    const auto fit = fit_peak(hist, 1.0, sim.source().pulse_period_ps());
    std::snprintf(detail_buf, sizeof detail_buf, "fitted rms %.2f ps over %zu detections",
                  fit.sigma_ps, stream.tags.size());
    return stream.tags.size() >= 100'000 && std::abs(fit.sigma_ps - 39.0) <= 1.0;
}

// --- 3. peak spread under a 5 ns/s residual ----------------------------

bool check_peak_spread() {
    // 100 ms of Early-only pulses detuned by 5e-9, folded at the nominal
    // frequency: the drift sweeps the peak across 500 ps. Full width is the
    // extent above half the plateau.
    std::mt19937_64 rng(11);
    std::geometric_distribution<std::uint64_t> gap(0.02);
    std::normal_distribution<double> jitter(0.0, 39.0);
    std::vector<TimeTagPs> tags;
    const std::uint64_t n_pulses = std::uint64_t(0.1 * 1e12 / 2000.0);
    for (std::uint64_t k = gap(rng); k < n_pulses; k += 1 + gap(rng))
        tags.push_back(TimeTagPs(std::llround(double(k) * 2000.0 * (1.0 + 5e-9) + jitter(rng))));

    const auto fold = FoldRational::from_period_ps(2000.0);
    const auto hist = fold_histogram(tags, fold, 0, 1.0);

    // Plateau height from the top decile of bins; full width at half of it.
    std::vector<std::uint64_t> sorted = hist;
    std::sort(sorted.begin(), sorted.end());
    const double plateau = double(sorted[sorted.size() - sorted.size() / 20]);
    std::size_t above = 0;
    for (auto c : hist) above += double(c) >= plateau / 2.0;
    std::snprintf(detail_buf, sizeof detail_buf, "full width %zu ps (expect 500 +- 50)", above);
    return above >= 450 && above <= 550;
}

// --- 4. full-range sweep accuracy and fold scaling ---------------------

bool check_sweep() {
    const auto t_start = Clock::now();

    // Recovery anywhere in +-20 ppm at the 0.5 ns/s step, on the 100 ms
    // acquisition window of a tag stream 1e7 tags long.
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> draw(-1.8e-5, 1.8e-5);
    bool recovered = true;
    double worst_residual = 0.0;
    SweepParams params; // defaults: +-2e-5 at 5e-10
    for (int trial = 0; trial < 3; ++trial) {
        const double u_true = draw(rng);
        auto cfg = ideal_pair_config();
        cfg.seed = 100 + std::uint64_t(trial);
        cfg.sender_clock.kind = ClockKind::Quartz; // ideal kind forbids an offset
        cfg.sender_clock.fractional_offset = u_true;
        cfg.session.duration_s = 37.5; // ~1e7 tags at 270 kcps
        auto sim = cfg.make_simulator();
        std::vector<TimeTagPs> acq;
        for (std::uint64_t b = 0; b < sim.block_count() && acq.size() < 10'000'000; ++b) {
            const auto blk = sim.block(b);
            acq.insert(acq.end(), blk.tags.begin(), blk.tags.end());
        }
        const TimeTagPs t0 = acq.front();
        const auto end = std::lower_bound(acq.begin(), acq.end(), t0 + TimeTagPs(1e11));
        const auto result = frequency_sweep(acq.data(), std::size_t(end - acq.begin()),
                                            cfg.source.clock_rate_hz, params);
        const double residual = std::abs(result.best_offset - u_true);
        worst_residual = std::max(worst_residual, residual);
        recovered = recovered && residual <= params.step + 1e-15;
        // The confirming fold over the whole 1e7-tag stream, O(n).
        const auto f = FoldRational::from_frequency_hz(cfg.source.clock_rate_hz)
                           .scaled(1.0 + result.best_offset);
        fold_histogram(acq.data(), acq.size(), f, t0, 1.0);
    }
    const double sweep_wall = seconds_since(t_start);

    // O(n) fold scaling at n = 1e5, 1e6, 1e7.
    std::vector<TimeTagPs> tags(10'000'000);
    TimeTagPs t = 0;
    std::mt19937_64 trng(5);
    std::uniform_int_distribution<TimeTagPs> gap(1, 7000);
    for (auto& v : tags) v = (t += gap(trng));
    const auto fold = FoldRational::from_period_ps(2000.0);
    std::vector<double> ns = {1e5, 1e6, 1e7}, times;
    for (double n : ns) {
        const auto f0 = Clock::now();
        fold_histogram(tags.data(), std::size_t(n), fold, 0, 1.0);
        times.push_back(seconds_since(f0));
    }
    const double r2 = linear_fit_r2(ns, times);

    std::snprintf(detail_buf, sizeof detail_buf,
                  "worst residual %.2g (step 5e-10), wall %.0f s, fold-time R^2 %.4f",
                  worst_residual, sweep_wall, r2);
    return recovered && sweep_wall < 7200.0 && r2 >= 0.98;
}

// --- 5. error-rate dip against the sent sequence -----------------------

bool check_qber_dip() {
    const auto seq = SymbolSequence::from_seed(77, 1000);
    std::mt19937_64 rng(78);
    std::uniform_int_distribution<int> shift_draw(-100, 100);
    std::bernoulli_distribution detect(0.4);
    std::bernoulli_distribution flip(0.01);
    std::bernoulli_distribution coin(0.5);

    const int injected = shift_draw(rng);
    std::vector<TimeTagPs> tags;
    for (std::uint64_t k = 0; k < 50'000; ++k) {
        if (!detect(rng)) continue;
        Symbol s = seq.at_pulse(k + std::uint64_t(std::int64_t(injected) + 1000));
        double slot;
        if (is_timing_basis(s)) {
            bool late = s == Symbol::Late;
            if (flip(rng)) late = !late;
            slot = late ? 1000.0 : 0.0;
        } else {
            slot = coin(rng) ? 1000.0 : 0.0;
        }
        tags.push_back(TimeTagPs(k * 2000 + std::llround(slot)));
    }

    const auto result = absolute_offset_search(tags, seq, 0.0, 500e6, 500);
    // best_shift s pairs period q with sequence index q - s; the stream was
    // built from at_pulse(k + injected), so the dip sits at s = -injected.
    const std::int64_t want = (std::int64_t(injected) + 1000) % 1000;
    const std::int64_t got = ((-result.best_shift % 1000) + 1000) % 1000;

    double off_sum = 0.0;
    std::size_t off_n = 0;
    double off_min = 1.0;
    for (std::size_t i = 0; i < result.qber_curve.size(); ++i) {
        if (result.shifts[i] == result.best_shift) continue;
        off_sum += result.qber_curve[i];
        off_min = std::min(off_min, result.qber_curve[i]);
        ++off_n;
    }
    const double off_mean = off_sum / double(off_n);
    std::snprintf(detail_buf, sizeof detail_buf,
                  "shift %+d recovered, dip qber %.3f, off-dip mean %.3f min %.3f", injected,
                  result.min_qber, off_mean, off_min);
    return got == want && result.min_qber < 0.02 && std::abs(off_mean - 0.5) <= 0.02 &&
           off_min > 0.25;
}

// --- 6. five-minute tracked session and update-time scan ---------------

bool check_tracking_session() {
    // 312 s instead of exactly 300 so the tau = 100 s stability point of
    // check 8 has the sample count it needs; the extra 4% costs nothing.
    auto cfg = default_config();
    cfg.session.duration_s = 312.0;
    const auto tracked = run_local_session(cfg);
    if (!tracked.summary.initialized || tracked.summary.tracking_lost) {
        std::snprintf(detail_buf, sizeof detail_buf, "tracked session failed: %s",
                      tracked.summary.failure.c_str());
        return false;
    }
    // Stash the tracked offsets for check 8 before anything below can bail.
    g_tracked_offsets = tracked.final_state.offset_buffer;

    // Ideal-clock control run: same signal chain, nothing to track, so the
    // fitted widths measure the static budget plus estimator bias.
    auto control_cfg = ideal_pair_config();
    control_cfg.session.duration_s = 60.0;
    const auto control = run_local_session(control_cfg);

    const double s_t = tracked.summary.mean_aposteriori_sigma_ps;
    const double s_c = control.summary.mean_aposteriori_sigma_ps;
    const double sync_ps = s_t > s_c ? std::sqrt(s_t * s_t - s_c * s_c) : 0.0;

    // A-priori sync jitter versus update time, one simulated stream.
    std::vector<double> update_times = {0.15, 0.3, 0.6, 1.2};
    std::vector<double> apriori_jitter;
    for (double tf : update_times) {
        auto scan_cfg = default_config();
        scan_cfg.session.duration_s = 48.0;
        scan_cfg.session.update_time_s = tf;
        const auto run = run_local_session(scan_cfg);
        if (!run.summary.initialized || run.summary.tracking_lost) {
            std::snprintf(detail_buf, sizeof detail_buf, "scan at %.2f s failed: %s", tf,
                          run.summary.failure.c_str());
            return false;
        }
        apriori_jitter.push_back(
            sync_jitter(run.summary.mean_apriori_sigma_ps, run.summary.jitter_budget_ps)
                .jitter_ps);
    }
    bool monotone = true;
    for (std::size_t i = 1; i < apriori_jitter.size(); ++i)
        monotone = monotone && apriori_jitter[i] >= apriori_jitter[i - 1];
    const double r2 = linear_fit_r2(update_times, apriori_jitter);

    std::snprintf(detail_buf, sizeof detail_buf,
                  "sync jitter %.2f ps (tracked %.2f / control %.2f); a-priori scan "
                  "{%.1f %.1f %.1f %.1f} ps, R^2 %.3f",
                  sync_ps, s_t, s_c, apriori_jitter[0], apriori_jitter[1], apriori_jitter[2],
                  apriori_jitter[3], r2);

    return sync_ps <= 5.0 && monotone && r2 >= 0.9;
}

// --- 7. symbol slip recovery --------------------------------------------

bool check_slip_recovery() {
    auto cfg = default_config();
    cfg.session.duration_s = 3.0;
    auto sim = cfg.make_simulator();
    std::vector<TimeTagPs> tags;
    for (std::uint64_t b = 0; b < sim.block_count(); ++b) {
        const auto blk = sim.block(b);
        tags.insert(tags.end(), blk.tags.begin(), blk.tags.end());
    }
    std::sort(tags.begin(), tags.end());
    // The paper's 2.5 ns scenario in our 2 ns period: everything after 1.5 s
    // arrives one period late.
    for (auto& t : tags)
        if (t >= TimeTagPs(1.5e12)) t += 2000;

    VectorTagSource source(std::move(tags));
    SessionRunner runner(cfg.tracker_params(), cfg.make_sequence(),
                         jitter_budget_total_ps({37.0, 13.0, 3.0}));
    const auto result = runner.run(source);
    if (!result.summary.initialized || result.summary.tracking_lost) {
        std::snprintf(detail_buf, sizeof detail_buf, "session failed: %s",
                      result.summary.failure.c_str());
        return false;
    }

    std::size_t slip_index = result.updates.size();
    std::size_t slips = 0;
    for (std::size_t i = 0; i < result.updates.size(); ++i)
        if (result.updates[i].slip_recovered) {
            slip_index = i;
            ++slips;
        }
    if (slips != 1 || slip_index == 0) {
        std::snprintf(detail_buf, sizeof detail_buf, "expected one recovery, saw %zu", slips);
        return false;
    }

    // The recovery must re-shift the accumulated offset by the 2 ns period.
    const auto& buf = result.final_state.offset_buffer;
    const double step = std::abs(buf[slip_index].second - buf[slip_index - 1].second);
    bool qber_ok = true;
    for (std::size_t i = slip_index; i < result.updates.size(); ++i)
        qber_ok = qber_ok && result.updates[i].qber < 0.05;

    std::snprintf(detail_buf, sizeof detail_buf,
                  "recovered at update %zu with %.0f ps correction, qber after %.4f", slip_index,
                  step, result.updates.back().qber);
    return std::abs(step - 2000.0) < 50.0 && qber_ok;
}

// --- 8. stability estimator suite ---------------------------------------

bool check_allan_suite() {
    // (a) TDEV identity on a quartz trajectory.
    const auto traj = synthesize_trajectory(ClockSpec::quartz(3), 60.0, 1e-3);
    PhaseSeries qs;
    qs.sample_interval_s = 1e-3;
    for (double v : traj.phase_error_ps) qs.x_s.push_back(v * 1e-12);
    const auto taus = default_tau_grid(qs.x_s.size(), qs.sample_interval_s);
    const auto m_curve = mdev(qs, taus);
    const auto t_curve = tdev(qs, taus);
    bool identity = m_curve.taus_s == t_curve.taus_s;
    for (std::size_t i = 0; identity && i < m_curve.taus_s.size(); ++i) {
        const double expect = m_curve.taus_s[i] / std::sqrt(3.0) * m_curve.values[i];
        identity = std::abs(t_curve.values[i] - expect) <= 1e-12 * std::abs(expect);
    }

    // (b) power-law slopes of the two synthetic noise classes.
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1e-11);
    PhaseSeries wpm;
    wpm.sample_interval_s = 1.0;
    wpm.x_s.resize(200'000);
    for (auto& v : wpm.x_s) v = g(rng);
    std::vector<double> wtaus;
    for (double m = 1; m <= 1000; m *= std::pow(10.0, 0.25)) wtaus.push_back(std::round(m));
    const auto w_noise = identify_noise(mdev(wpm, wtaus));

    ClockSpec flicker;
    flicker.kind = ClockKind::Quartz; // carrier for a pure flicker term
    flicker.flicker_fm_amp = 3e-12;
    flicker.seed = 12;
    const auto ftraj = synthesize_trajectory(flicker, 400.0, 1e-3);
    PhaseSeries fs;
    fs.sample_interval_s = 1e-3;
    for (double v : ftraj.phase_error_ps) fs.x_s.push_back(v * 1e-12);
    std::vector<double> ftaus;
    for (double tau = 0.04; tau <= 2.6; tau *= std::pow(10.0, 0.25))
        ftaus.push_back(std::round(tau * 1000.0) / 1000.0);
    const auto f_noise = identify_noise(mdev(fs, ftaus));

    // (c) tracked vs untracked at tau ~ 100 s, from the five-minute session
    // of check 6 against the same clock pair left free-running.
    if (g_tracked_offsets.size() < 2002) {
        std::snprintf(detail_buf, sizeof detail_buf,
                      "tracked offsets unavailable (%zu updates); run check 6 first",
                      g_tracked_offsets.size());
        return false;
    }
    const auto tracked = offsets_to_series(g_tracked_offsets, "tracked");

    auto cfg = default_config();
    cfg.session.duration_s = 312.0;
    ClockModel sender(cfg.resolved_sender_clock(), 312.0);
    ClockModel receiver(cfg.resolved_receiver_clock(), 312.0);
    PhaseSeries untracked;
    untracked.label = "untracked";
    untracked.sample_interval_s = tracked.sample_interval_s;
    for (std::size_t k = 0; k < tracked.x_s.size(); ++k) {
        const TimeTagPs t = TimeTagPs(double(k) * tracked.sample_interval_s * 1e12);
        untracked.x_s.push_back((receiver.time_error_ps(t) - sender.time_error_ps(t)) * 1e-12);
    }
    // The paper subtracts the linear component before comparing stability.
    double slope_ns = 0.0;
    const auto untracked_flat = detrend_linear(untracked, &slope_ns);

    const double tau100 = 667.0 * tracked.sample_interval_s; // ~100.05 s
    const auto m_tracked = mdev(tracked, {tau100});
    const auto m_untracked = mdev(untracked_flat, {tau100});
    const double ratio = m_untracked.values.at(0) / m_tracked.values.at(0);

    // Side-by-side report, not asserted: the paper's free-running reference
    // is 19 ps TDEV at 1 s.
    const double tau1 = 7.0 * tracked.sample_interval_s;
    const auto t1 = tdev(tracked, {tau1});
    std::printf("        [info] tracked tdev(%.2f s) = %.2f ps vs 19 ps free-running reference; "
                "untracked ramp %.1f ns/s\n",
                tau1, t1.values.at(0) * 1e12, slope_ns);

    std::snprintf(detail_buf, sizeof detail_buf,
                  "identity ok=%d, white-pm slope %.2f, flicker slope %.2f, "
                  "untracked/tracked at 100 s = %.0fx",
                  int(identity), w_noise.exponent, f_noise.exponent, ratio);
    return identity && std::abs(w_noise.exponent + 1.5) <= 0.1 &&
           std::abs(f_noise.exponent) <= 0.15 && ratio >= 100.0;
}

// --- 9. fiber thermal delay ---------------------------------------------

bool check_fiber_delay() {
    ChannelParams ch;
    ch.fiber_length_m = 10.0;
    const double d = fiber_thermal_delay_ps(ch, 1.0);
    std::snprintf(detail_buf, sizeof detail_buf, "10 m, 1 K -> %.3f ps", d);
    return d >= 0.35 && d <= 0.41;
}

// --- 10. wire protocol end to end ----------------------------------------

Message random_message(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, 5);
    std::uniform_int_distribution<std::uint64_t> u64(0, std::uint64_t(1) << 50);
    std::uniform_int_distribution<int> small(0, 200);
    std::uniform_real_distribution<double> real(-1e-3, 1e-3);
    switch (pick(rng)) {
    case 0: {
        TagsMsg m;
        TimeTagPs t = 0;
        const int n = 1 + small(rng);
        for (int i = 0; i < n; ++i) m.tags.push_back(t += 1 + TimeTagPs(u64(rng) % 4000));
        return m;
    }
    case 1: return SeqRequestMsg{};
    case 2: {
        SeqRevealMsg m;
        const int n = 1 + small(rng);
        for (int i = 0; i < n; ++i) m.symbols.push_back(Symbol(u64(rng) % 4));
        return m;
    }
    case 3: return InitDoneMsg{std::int64_t(u64(rng)) - (std::int64_t(1) << 49), real(rng)};
    case 4: return StatusMsg{std::abs(real(rng)), std::abs(real(rng)) * 1e5};
    default: {
        ErrorMsg m;
        m.code = std::uint16_t(u64(rng) & 0xffff);
        for (int i = small(rng); i > 0; --i) m.text.push_back(char('a' + u64(rng) % 26));
        return m;
    }
    }
}

bool check_wire() {
    // Fuzz round-trip.
    std::mt19937_64 rng(1234);
    for (int i = 0; i < 10'000; ++i) {
        const Message msg = random_message(rng);
        const std::string frame = encode_frame(msg);
        if (!(decode_frame(frame.data(), frame.size()) == msg)) {
            std::snprintf(detail_buf, sizeof detail_buf, "fuzz case %d failed round-trip", i);
            return false;
        }
    }

    // Exactly-once disclosure.
    SessionStateMachine sm;
    sm.on_message(SeqRequestMsg{});
    sm.on_message(SeqRequestMsg{});
    sm.on_message(SeqRevealMsg{{Symbol::Early}});
    const auto second = sm.on_message(SeqRevealMsg{{Symbol::Early}});
    const bool once = sm.reveal_count() == 1 && second.send_error &&
                      second.error_code == kErrRepeatedReveal &&
                      sm.state() == SessionState::Failed;
    if (!once) {
        std::snprintf(detail_buf, sizeof detail_buf, "repeated reveal was not rejected");
        return false;
    }

    // Two processes over loopback against the same-seed in-process run.
    auto cfg = default_config();
    cfg.session.duration_s = 3.0;
    const auto local = run_local_session(cfg);

    TcpListener listener(0);
    SenderSessionStats stats;
    std::thread server([&] {
        auto conn = listener.accept_one();
        stats = serve_sender_session(conn, cfg.make_sequence());
    });
    const auto remote = run_remote_session(cfg, "127.0.0.1", listener.port());
    server.join();

    const bool match = summary_to_json(remote.summary) == summary_to_json(local.summary);
    std::snprintf(detail_buf, sizeof detail_buf,
                  "fuzz 10000 ok, reveal-once ok, loopback state=%s reveals=%d summary match=%d",
                  session_state_name(stats.final_state), stats.reveals, int(match));
    return stats.final_state == SessionState::Tracking && stats.reveals == 1 && match;
}

struct Criterion {
    int id;
    const char* text;
    bool (*fn)();
};

} // namespace

int main() {
    const Criterion checks[] = {
        {1, "fold histogram equals brute-force pair correlation", check_fold_oracle},
        {2, "jitter budget 3/37/13 ps fits to 39 +- 1 ps", check_jitter_budget},
        {3, "5 ns/s residual spreads the peak to 500 ps +- 10%", check_peak_spread},
        {4, "sweep recovers +-20 ppm offsets at 0.5 ns/s; folds scale linearly", check_sweep},
        {5, "error-rate dip finds the injected symbol shift", check_qber_dip},
        {6, "5-min tracked session: sync jitter <= 5 ps, update-time scan linear",
         check_tracking_session},
        {7, "+1-period slip recovered within one update by a 2 ns step", check_slip_recovery},
        {8, "stability suite: TDEV identity, power laws, 100x improvement", check_allan_suite},
        {9, "fiber thermal delay in the 0.35-0.41 ps band", check_fiber_delay},
        {10, "wire fuzz, one-time disclosure, loopback session parity", check_wire},
    };

    int failures = 0;
    for (const auto& c : checks) {
        bool ok = false;
        detail_buf[0] = '\0';
        const auto t0 = Clock::now();
        try {
            ok = c.fn();
        } catch (const std::exception& e) {
            std::snprintf(detail_buf, sizeof detail_buf, "exception: %s", e.what());
        }
        std::printf("%s  %2d. %s  [%s, %.1f s]\n", ok ? "PASS" : "FAIL", c.id, c.text, detail_buf,
                    seconds_since(t0));
        std::fflush(stdout);
        failures += !ok;
    }
    if (failures) std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
