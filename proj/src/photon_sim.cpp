#include "pulsesync/photon_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pulsesync/errors.hpp"
#include "pulsesync/rng.hpp"

namespace psync {

namespace {

constexpr double kPsPerS = 1e12;

// Floor quantization that also works for the occasional slightly negative
// timestamp at the very start of a run.
inline TimeTagPs quantize(TimeTagPs t, std::uint32_t res) {
    if (res <= 1) return t;
    TimeTagPs q = t / res;
    if (t % res < 0) --q;
    return q * res;
}

void validate(const SourceParams& src, const ChannelParams& ch, const DetectorParams& det,
              double duration_s) {
    auto pos = [](double v) { return v > 0 && std::isfinite(v); };
    auto nonneg = [](double v) { return v >= 0 && std::isfinite(v); };
    if (!pos(src.clock_rate_hz)) throw ValidationError("clock rate must be positive");
    if (!pos(src.mean_photon_number) || src.mean_photon_number > 1.0)
        throw ValidationError("mean photon number must be in (0, 1]");
    if (!nonneg(src.source_jitter_rms_ps)) throw ValidationError("source jitter must be >= 0");
    if (!nonneg(ch.loss_db)) throw ValidationError("channel loss must be non-negative dB");
    if (!nonneg(ch.background_rate_cps)) throw ValidationError("background rate must be >= 0");
    if (!std::isfinite(ch.propagation_delay_ps) || !nonneg(ch.fiber_length_m))
        throw ValidationError("channel delay parameters invalid");
    if (!pos(ch.wavelength_m)) throw ValidationError("wavelength must be positive");
    if (!nonneg(det.detector_jitter_rms_ps) || !nonneg(det.adc_jitter_rms_ps) ||
        !nonneg(det.dead_time_ps))
        throw ValidationError("detector parameters must be non-negative");
    if (det.resolution_ps == 0) throw ValidationError("resolution must be at least 1 ps");
    if (!pos(duration_s)) throw ValidationError("duration must be positive");
}

} // namespace

PhotonSimulator::PhotonSimulator(SourceParams src, ChannelParams ch, DetectorParams det,
                                 SymbolSequence seq, double duration_s, std::uint64_t seed)
    : src_(std::move(src)), ch_(std::move(ch)), det_(std::move(det)), seq_(std::move(seq)),
      duration_s_(duration_s), seed_(seed) {
    validate(src_, ch_, det_, duration_s_);
    if (seq_.size() == 0) throw ValidationError("symbol sequence must not be empty");

    total_pulses_ = static_cast<std::uint64_t>(duration_s_ * src_.clock_rate_hz);
    if (total_pulses_ == 0) throw ValidationError("duration too short for a single pulse");
    const double expected = detection_probability() * static_cast<double>(total_pulses_) +
                            ch_.background_rate_cps * duration_s_;
    if (expected > 1e9) throw CapacityError("expected tag count exceeds 1e9");

    const double period = src_.pulse_period_ps();
    period_int_ps_ = std::llround(period);
    if (std::abs(period - static_cast<double>(period_int_ps_)) > 1e-6)
        throw ValidationError("pulse period must be an integer number of ps");

    sender_ = std::make_shared<ClockModel>(src_.sender_clock, duration_s_);
    receiver_ = std::make_shared<ClockModel>(det_.receiver_clock, duration_s_ + 1e-3);

    pulses_per_block_ = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::llround(src_.clock_rate_hz * 0.25)));
    n_blocks_ = (total_pulses_ + pulses_per_block_ - 1) / pulses_per_block_;
}

double PhotonSimulator::detection_probability() const {
    const double transmission = std::pow(10.0, -ch_.loss_db / 10.0);
    return 1.0 - std::exp(-src_.mean_photon_number * transmission);
}

double PhotonSimulator::combined_jitter_ps() const {
    return jitter_budget_total_ps(
        {src_.source_jitter_rms_ps, det_.detector_jitter_rms_ps, det_.adc_jitter_rms_ps});
}

double PhotonSimulator::delay_ps(double t_true_s) const {
    double dt_k = ch_.temp_offset_k;
    if (ch_.temp_amplitude_k != 0)
        dt_k += ch_.temp_amplitude_k * std::sin(2.0 * M_PI * t_true_s / ch_.temp_period_s);
    return ch_.propagation_delay_ps + fiber_thermal_delay_ps(ch_, dt_k);
}

TagStream PhotonSimulator::block(std::uint64_t block_index) const {
    if (block_index >= n_blocks_) throw RangeError("simulation block index out of range");
    const std::uint64_t first = block_index * pulses_per_block_;
    const std::uint64_t last = std::min(first + pulses_per_block_, total_pulses_);

    std::mt19937_64 gen(derive_seed(seed_, block_index));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double p = detection_probability();
    std::geometric_distribution<std::uint64_t> gap(p);

    const double sigma = combined_jitter_ps();
    const TimeTagPs half = period_int_ps_ / 2;

    // Tag paired with its truth index (or npos for background).
    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::vector<std::pair<TimeTagPs, std::size_t>> events;
    std::vector<TruthRecord> truth;
    const auto expect = static_cast<std::size_t>(p * static_cast<double>(last - first) * 1.2 + 64);
    events.reserve(expect);
    truth.reserve(expect);

    // Signal detections: geometric gaps between detecting pulses.
    std::uint64_t i = first + gap(gen);
    while (i < last) {
        const Symbol sym = seq_.at_pulse(i);
        int bin = 0;
        switch (sym) {
            case Symbol::Early: bin = 0; break;
            case Symbol::Late: bin = 1; break;
            default: bin = uni(gen) < 0.5 ? 0 : 1; break;
        }
        const TimeTagPs emit_local = static_cast<TimeTagPs>(i) * period_int_ps_ + bin * half;
        const TimeTagPs emit_true = sender_->true_time(emit_local);
        const double arrive = static_cast<double>(emit_true) +
                              delay_ps(static_cast<double>(emit_true) / kPsPerS) +
                              (sigma > 0 ? sigma * gauss(gen) : 0.0);
        const auto arrive_i = static_cast<TimeTagPs>(std::llround(arrive));
        const double local = arrive + receiver_->time_error_ps(arrive_i);
        events.emplace_back(
            quantize(static_cast<TimeTagPs>(std::llround(local)), det_.resolution_ps),
            truth.size());
        truth.push_back({i, sym, emit_true});
        i += 1 + gap(gen);
    }

    // Background counts: homogeneous Poisson in true time over the block.
    if (ch_.background_rate_cps > 0) {
        const double t0 = static_cast<double>(first) * static_cast<double>(period_int_ps_);
        const double t1 = static_cast<double>(last) * static_cast<double>(period_int_ps_);
        std::poisson_distribution<std::uint64_t> n_bg(ch_.background_rate_cps * (t1 - t0) /
                                                      kPsPerS);
        const std::uint64_t k = n_bg(gen);
        for (std::uint64_t b = 0; b < k; ++b) {
            const double t = t0 + uni(gen) * (t1 - t0);
            const auto ti = static_cast<TimeTagPs>(std::llround(t));
            const double local = t + receiver_->time_error_ps(ti);
            events.emplace_back(
                quantize(static_cast<TimeTagPs>(std::llround(local)), det_.resolution_ps), npos);
        }
    }

    std::stable_sort(events.begin(), events.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    // Dead-time filter (dead_time 0 still drops exact duplicates) while
    // keeping tag/truth pairing intact.
    TagStream out;
    out.tags.reserve(events.size());
    out.truth.reserve(truth.size());
    TimeTagPs prev = 0;
    bool have_prev = false;
    const auto dead = static_cast<TimeTagPs>(std::llround(det_.dead_time_ps));
    for (const auto& [tag, truth_idx] : events) {
        if (have_prev && tag - prev <= dead) continue;
        out.tags.push_back(tag);
        if (truth_idx != npos) out.truth.push_back(truth[truth_idx]);
        prev = tag;
        have_prev = true;
    }
    return out;
}

TagStream PhotonSimulator::run_all() const {
    TagStream all;
    for (std::uint64_t b = 0; b < n_blocks_; ++b) {
        TagStream blk = block(b);
        all.tags.insert(all.tags.end(), blk.tags.begin(), blk.tags.end());
        all.truth.insert(all.truth.end(), blk.truth.begin(), blk.truth.end());
    }
    return all;
}

TagStream emit_and_detect(const SourceParams& src, const ChannelParams& ch,
                          const DetectorParams& det, const SymbolSequence& seq,
                          double duration_s, std::uint64_t seed) {
    return PhotonSimulator(src, ch, det, seq, duration_s, seed).run_all();
}

double fiber_thermal_delay_ps(const ChannelParams& ch, double delta_kelvin) {
    constexpr double c_m_per_s = 299792458.0;
    const double seconds = (ch.refractive_index * ch.expansion_per_k * ch.fiber_length_m +
                            ch.fiber_length_m * ch.thermo_optic_per_k) *
                           delta_kelvin / c_m_per_s;
    return seconds * kPsPerS;
}

double jitter_budget_total_ps(const std::vector<double>& components_ps) {
    double sum = 0.0;
    for (double c : components_ps) {
        if (c < 0 || !std::isfinite(c))
            throw ValidationError("jitter components must be non-negative");
        sum += c * c;
    }
    return std::sqrt(sum);
}

} // namespace psync
