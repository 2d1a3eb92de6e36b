#pragma once

#include "pulsesync/clock_model.hpp"
#include "pulsesync/photon_sim.hpp"
#include "pulsesync/tracker.hpp"
#include "pulsesync/types.hpp"

#include <cstdint>
#include <string>

namespace psync {

struct SequenceConfig {
    std::size_t length = 1000;
    std::uint64_t seed = 7;
    // Explicit pattern as E/L/P/M letters; overrides length/seed when set.
    std::string symbols;
};

struct SessionConfig {
    double duration_s = 10.0;
    double acquisition_time_s = 0.1;
    double update_time_s = 0.15;
    double sweep_range = 2e-5;  // fractional frequency, +-range
    double sweep_step = 5e-10;
    double bin_ps = 1.0;
    double corr_window_ps = 39.0;
    double significance_threshold = 5.0;
    double qber_slip_threshold = 0.4;
    double qber_accept = 0.1;
    int slip_k_max = 3;
};

struct OutputConfig {
    std::string dir = "out";
    std::string format = "csv"; // tabular output format: csv or json
};

// One experiment end to end: clock pair, signal chain, shared sequence,
// session loop parameters and output routing. Serializes to JSON with
// unit-suffixed field names; parse(serialize(c)) is lossless.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    ClockSpec sender_clock;
    ClockSpec receiver_clock;
    SourceParams source;     // clock specs inside are ignored; injected on build
    ChannelParams channel;
    DetectorParams detector;
    SequenceConfig sequence;
    SessionConfig session;
    OutputConfig outputs;

    void validate() const;
    SymbolSequence make_sequence() const;
    TrackerParams tracker_params() const;
    // Simulator with clocks and derived per-component seeds wired in.
    PhotonSimulator make_simulator() const;
    // Clock specs with auto-derived seeds filled in (seed 0 means derive).
    ClockSpec resolved_sender_clock() const;
    ClockSpec resolved_receiver_clock() const;
};

// Paper-scale defaults: 500 MHz source at ~270 kcps detected rate, free
// running quartz pair, 100 ms acquisition, 150 ms update loop.
ExperimentConfig default_config();

ExperimentConfig parse_config(const std::string& json_text);
std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig load_config_file(const std::string& path);
void save_config_file(const ExperimentConfig& config, const std::string& path);

const char* clock_kind_name(ClockKind kind);
ClockKind clock_kind_from_name(const std::string& name);

} // namespace psync
