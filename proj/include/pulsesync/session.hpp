#pragma once

#include "pulsesync/config.hpp"
#include "pulsesync/photon_sim.hpp"
#include "pulsesync/tracker.hpp"
#include "pulsesync/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace psync {

// Pull-based tag supply so a session can run off the simulator, a tag file
// or a live stream without holding the whole run in memory. Chunks are
// internally sorted; consecutive chunks may overlap by at most nanoseconds
// at the seam.
class TagSource {
  public:
    virtual ~TagSource() = default;
    // Next batch of tags; empty means the stream is exhausted.
    virtual std::vector<TimeTagPs> next_chunk() = 0;
};

class SimulatorTagSource : public TagSource {
  public:
    explicit SimulatorTagSource(PhotonSimulator sim) : sim_(std::move(sim)) {}
    std::vector<TimeTagPs> next_chunk() override;

  private:
    PhotonSimulator sim_;
    std::uint64_t next_block_ = 0;
};

class VectorTagSource : public TagSource {
  public:
    explicit VectorTagSource(std::vector<TimeTagPs> tags) : tags_(std::move(tags)) {}
    std::vector<TimeTagPs> next_chunk() override;

  private:
    std::vector<TimeTagPs> tags_;
    bool emitted_ = false;
};

struct SessionSummary {
    bool initialized = false;
    double init_freq_diff = 0.0;     // sweep + tracking start estimate
    double absolute_offset_ps = 0.0; // at initialization
    double init_min_qber = 0.0;
    std::size_t updates = 0;
    std::size_t slips_recovered = 0;
    bool tracking_lost = false;
    std::string failure;

    double mean_apriori_sigma_ps = 0.0;
    double mean_aposteriori_sigma_ps = 0.0;
    double pooled_aposteriori_sigma_ps = 0.0; // rms of per-window sigmas
    double mean_qber = 0.0;
    double mean_significance = 0.0;
    double mean_corr_rate_cps = 0.0;

    // Quadrature excess of the measured widths over the static jitter
    // budget, in the mean and pooled variants.
    double jitter_budget_ps = 0.0;
    double sync_jitter_mean_ps = 0.0;
    double sync_jitter_pooled_ps = 0.0;
    bool sync_jitter_clamped = false;
};

struct SessionResult {
    SessionSummary summary;
    std::vector<TrackUpdate> updates;
    TrackerState final_state;
};

// Initialization plus the windowed tracking loop. Initialization failures
// (sweep, peak, alignment) propagate as exceptions; losing the peak later
// ends the loop early with tracking_lost set so partial results survive.
class SessionRunner {
  public:
    SessionRunner(TrackerParams params, SymbolSequence seq, double jitter_budget_ps);

    SessionResult run(TagSource& source);

    // When set, called with the acquisition tags to obtain the symbol
    // sequence (the wire client fetches it from the sender here); replaces
    // the sequence passed to the constructor.
    std::function<SymbolSequence(const std::vector<TimeTagPs>&)> sequence_provider;
    // Called once tracking is initialized, before the first update window.
    std::function<void(const TrackerState&)> on_initialized;
    // Called after every accepted update (live status reporting).
    std::function<void(const TrackUpdate&)> on_update;

  private:
    TrackerParams params_;
    SymbolSequence seq_;
    double jitter_budget_ps_ = 0.0;
};

// Simulator-backed session as configured.
SessionResult run_local_session(const ExperimentConfig& config);

// Client side of a two-process run: simulate locally, but obtain the symbol
// sequence from the sender daemon via the one-time disclosure handshake and
// stream status frames back while tracking.
SessionResult run_remote_session(const ExperimentConfig& config, const std::string& host,
                                 std::uint16_t port);

// Per-update records; columns in this order:
// time_s,delta_t_ps,delta_u,freq_diff,apriori_sigma_ps,aposteriori_sigma_ps,
// qber,significance,slip_recovered,corr_rate_cps
void write_updates_csv(const std::vector<TrackUpdate>& updates, std::ostream& out);

// Accumulated timing offset per update: time_s,offset_ps.
void write_offsets_csv(const std::vector<std::pair<double, double>>& offsets, std::ostream& out);

std::string summary_to_json(const SessionSummary& summary);

} // namespace psync
