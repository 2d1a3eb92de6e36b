#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "pulsesync/clock_model.hpp"
#include "pulsesync/types.hpp"

namespace psync {

// Pulsed weak-coherent source. One symbol per clock period: Early occupies
// the start of the period, Late the half-period point, and the superposition
// symbols Plus/Minus click in either bin with equal probability.
struct SourceParams {
    double clock_rate_hz = 500e6;
    double mean_photon_number = 5.4e-4; // photons per pulse
    double source_jitter_rms_ps = 37.0; // optical pulse width
    ClockSpec sender_clock;

    double pulse_period_ps() const { return 1e12 / clock_rate_hz; }
};

// Lossy channel with constant propagation delay plus a thermal fiber term.
// The temperature profile is a constant offset plus an optional sinusoid.
struct ChannelParams {
    double loss_db = 0.0;
    double background_rate_cps = 150.0;
    double propagation_delay_ps = 0.0;
    double fiber_length_m = 0.0;
    double thermo_optic_per_k = 11e-6;    // dn/dT
    double expansion_per_k = 0.55e-6;     // dL/dT / L
    double refractive_index = 1.468;
    double wavelength_m = 1550e-9;
    double temp_offset_k = 0.0;           // constant part of dT(t)
    double temp_amplitude_k = 0.0;        // sinusoidal part of dT(t)
    double temp_period_s = 3600.0;
};

struct DetectorParams {
    double detector_jitter_rms_ps = 13.0;
    double adc_jitter_rms_ps = 3.0;
    double dead_time_ps = 0.0;
    std::uint32_t resolution_ps = 1; // timestamp quantization
    ClockSpec receiver_clock;
};

// Ground truth for one signal detection, for oracles and reports.
struct TruthRecord {
    std::uint64_t pulse_index;
    Symbol symbol;
    TimeTagPs true_emit_ps; // ideal-time emission instant
};

struct TagStream {
    std::vector<TimeTagPs> tags;    // receiver-local timestamps, sorted, unique
    std::vector<TruthRecord> truth; // signal detections only; background has none
};

// Full signal chain. Detections are thinned per pulse with probability
// 1 - exp(-mu * 10^(-loss/10)); pulses being independent, the gaps between
// detecting pulses are geometric, so the cost is O(detections), not
// O(pulses). The three jitters are independent Gaussians and are drawn as a
// single sample with their root-sum-square width.
class PhotonSimulator {
  public:
    PhotonSimulator(SourceParams src, ChannelParams ch, DetectorParams det, SymbolSequence seq,
                    double duration_s, std::uint64_t seed);

    // Deterministic per (seed, block): streaming block-by-block yields the
    // same tags as one big batch. Blocks cover ~0.25 s of pulses each.
    TagStream block(std::uint64_t block_index) const;
    std::uint64_t block_count() const { return n_blocks_; }

    // Concatenation of all blocks, for short runs.
    TagStream run_all() const;

    double duration_s() const { return duration_s_; }
    double detection_probability() const;
    double combined_jitter_ps() const;
    double delay_ps(double t_true_s) const; // propagation + thermal fiber term

    const SourceParams& source() const { return src_; }
    const ChannelParams& channel() const { return ch_; }
    const DetectorParams& detector() const { return det_; }
    const SymbolSequence& sequence() const { return seq_; }
    const ClockModel& sender_clock() const { return *sender_; }
    const ClockModel& receiver_clock() const { return *receiver_; }
    std::uint64_t total_pulses() const { return total_pulses_; }

  private:
    SourceParams src_;
    ChannelParams ch_;
    DetectorParams det_;
    SymbolSequence seq_;
    double duration_s_;
    std::uint64_t seed_;
    std::shared_ptr<ClockModel> sender_;
    std::shared_ptr<ClockModel> receiver_;
    std::uint64_t total_pulses_ = 0;
    std::uint64_t pulses_per_block_ = 0;
    std::uint64_t n_blocks_ = 0;
    TimeTagPs period_int_ps_ = 0;
};

// One-call variant of the simulator.
TagStream emit_and_detect(const SourceParams& src, const ChannelParams& ch,
                          const DetectorParams& det, const SymbolSequence& seq,
                          double duration_s, std::uint64_t seed);

// Propagation delay change of a fiber span under a temperature change:
// refractive-index shift plus thermal expansion of the geometric length,
// dt = (n*alpha*L + L*eps) * dT / c.
double fiber_thermal_delay_ps(const ChannelParams& ch, double delta_kelvin);

// Root-sum-square of independent jitter contributions.
double jitter_budget_total_ps(const std::vector<double>& components_ps);

} // namespace psync
