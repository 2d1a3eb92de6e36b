#include "pulsesync/session.hpp"

#include "pulsesync/errors.hpp"
#include "pulsesync/wire_endpoint.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace psync {

namespace {

constexpr double kPsPerS = 1e12;
// Cross-chunk seam disorder is bounded by jitter (~100 ps); one microsecond
// of lookahead proves a window boundary is final.
constexpr TimeTagPs kSeamGuardPs = 1'000'000;

TimeTagPs span_ps(double seconds) {
    return static_cast<TimeTagPs>(std::llround(seconds * kPsPerS));
}

// Buffers chunks from a TagSource and hands out consecutive half-open time
// windows, keeping only the unconsumed suffix in memory.
class TagWindower {
  public:
    explicit TagWindower(TagSource& source) : source_(source) {}

    std::optional<TimeTagPs> first_tag() {
        while (start_ == buf_.size() && pull()) {
        }
        if (start_ == buf_.size())
            return std::nullopt;
        return buf_[start_];
    }

    // True once every tag below end_ps is buffered: either a tag at least a
    // guard interval past the boundary exists, or the stream ended with data
    // reaching the boundary.
    bool cover(TimeTagPs end_ps) {
        while (!exhausted_ && (buf_.empty() || buf_.back() < end_ps + kSeamGuardPs))
            pull();
        return !buf_.empty() && buf_.back() >= end_ps;
    }

    // Tags in [begin_ps, end_ps), consuming everything below end_ps.
    std::vector<TimeTagPs> take(TimeTagPs begin_ps, TimeTagPs end_ps) {
        const auto base = buf_.begin() + static_cast<std::ptrdiff_t>(start_);
        const auto lo = std::lower_bound(base, buf_.end(), begin_ps);
        const auto hi = std::lower_bound(lo, buf_.end(), end_ps);
        std::vector<TimeTagPs> out(lo, hi);
        start_ = static_cast<std::size_t>(hi - buf_.begin());
        if (start_ > (1u << 20)) {
            buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(start_));
            start_ = 0;
        }
        return out;
    }

  private:
    bool pull() {
        if (exhausted_)
            return false;
        auto chunk = source_.next_chunk();
        if (chunk.empty()) {
            exhausted_ = true;
            return false;
        }
        const std::size_t old = buf_.size();
        buf_.insert(buf_.end(), chunk.begin(), chunk.end());
        if (old > start_ && buf_[old] < buf_[old - 1])
            std::inplace_merge(buf_.begin() + static_cast<std::ptrdiff_t>(start_),
                               buf_.begin() + static_cast<std::ptrdiff_t>(old), buf_.end());
        return true;
    }

    TagSource& source_;
    std::vector<TimeTagPs> buf_;
    std::size_t start_ = 0;
    bool exhausted_ = false;
};

double mean_of(const std::vector<TrackUpdate>& updates, double TrackUpdate::*field) {
    if (updates.empty())
        return 0.0;
    double sum = 0.0;
    for (const auto& u : updates)
        sum += u.*field;
    return sum / static_cast<double>(updates.size());
}

} // namespace

std::vector<TimeTagPs> SimulatorTagSource::next_chunk() {
    if (next_block_ >= sim_.block_count())
        return {};
    return sim_.block(next_block_++).tags;
}

std::vector<TimeTagPs> VectorTagSource::next_chunk() {
    if (emitted_)
        return {};
    emitted_ = true;
    return std::move(tags_);
}

SessionRunner::SessionRunner(TrackerParams params, SymbolSequence seq, double jitter_budget_ps)
    : params_(std::move(params)), seq_(std::move(seq)), jitter_budget_ps_(jitter_budget_ps) {
    params_.validate();
}

SessionResult SessionRunner::run(TagSource& source) {
    SessionResult result;
    TagWindower windower(source);

    const auto first = windower.first_tag();
    if (!first)
        throw ValidationError("tag stream is empty");
    const TimeTagPs t0 = *first;
    const TimeTagPs acq_end = t0 + span_ps(params_.acquisition_time_s);
    if (!windower.cover(acq_end))
        throw ValidationError("tag stream is shorter than the acquisition window");
    const auto acq_tags = windower.take(t0, acq_end);

    if (sequence_provider)
        seq_ = sequence_provider(acq_tags);
    if (seq_.size() == 0)
        throw ValidationError("session needs a symbol sequence");

    TrackerState state = initialize_tracker(acq_tags, t0, params_, seq_);
    result.summary.initialized = true;
    result.summary.init_freq_diff = state.freq_diff;
    result.summary.absolute_offset_ps = state.absolute_offset_ps;
    result.summary.init_min_qber = state.init_qber;
    if (on_initialized)
        on_initialized(state);

    const TimeTagPs window = span_ps(params_.update_time_s);
    while (true) {
        const TimeTagPs w0 = state.window_start_ps;
        if (!windower.cover(w0 + window))
            break; // stream ended; a partial window is dropped
        const auto tags = windower.take(w0, w0 + window);
        TrackUpdate update;
        try {
            update = track_update(state, tags, params_, seq_);
        } catch (const ResyncRequiredError& e) {
            result.summary.tracking_lost = true;
            result.summary.failure = e.what();
            break;
        }
        result.updates.push_back(update);
        if (on_update)
            on_update(update);
    }

    auto& s = result.summary;
    s.updates = result.updates.size();
    for (const auto& u : result.updates)
        if (u.slip_recovered)
            ++s.slips_recovered;
    s.mean_apriori_sigma_ps = mean_of(result.updates, &TrackUpdate::a_priori_sigma_ps);
    s.mean_aposteriori_sigma_ps = mean_of(result.updates, &TrackUpdate::a_posteriori_sigma_ps);
    double var = 0.0;
    for (const auto& u : result.updates)
        var += u.a_posteriori_sigma_ps * u.a_posteriori_sigma_ps;
    s.pooled_aposteriori_sigma_ps =
        result.updates.empty() ? 0.0 : std::sqrt(var / static_cast<double>(result.updates.size()));
    s.mean_qber = mean_of(result.updates, &TrackUpdate::qber);
    s.mean_significance = mean_of(result.updates, &TrackUpdate::significance);
    s.mean_corr_rate_cps = mean_of(result.updates, &TrackUpdate::corr_rate_cps);

    s.jitter_budget_ps = jitter_budget_ps_;
    const auto mean_excess = sync_jitter(s.mean_aposteriori_sigma_ps, jitter_budget_ps_);
    const auto pooled_excess = sync_jitter(s.pooled_aposteriori_sigma_ps, jitter_budget_ps_);
    s.sync_jitter_mean_ps = mean_excess.jitter_ps;
    s.sync_jitter_pooled_ps = pooled_excess.jitter_ps;
    s.sync_jitter_clamped = mean_excess.clamped || pooled_excess.clamped;

    result.final_state = std::move(state);
    return result;
}

SessionResult run_local_session(const ExperimentConfig& config) {
    config.validate();
    PhotonSimulator sim = config.make_simulator();
    const double budget = sim.combined_jitter_ps();
    SessionRunner runner(config.tracker_params(), config.make_sequence(), budget);
    SimulatorTagSource source(std::move(sim));
    return runner.run(source);
}

SessionResult run_remote_session(const ExperimentConfig& config, const std::string& host,
                                 std::uint16_t port) {
    config.validate();
    PhotonSimulator sim = config.make_simulator();
    const double budget = sim.combined_jitter_ps();

    SenderClient client(host, port);
    client.begin();
    SessionRunner runner(config.tracker_params(), SymbolSequence{}, budget);
    runner.sequence_provider = [&](const std::vector<TimeTagPs>& acq_tags) {
        client.send_tags(acq_tags);
        return client.request_sequence();
    };
    runner.on_initialized = [&](const TrackerState& state) {
        client.init_done(static_cast<std::int64_t>(std::llround(state.absolute_offset_ps)),
                         state.freq_diff);
    };
    runner.on_update = [&](const TrackUpdate& update) {
        client.send_status(update.qber, update.a_posteriori_sigma_ps);
    };

    SimulatorTagSource source(std::move(sim));
    SessionResult result = runner.run(source);
    client.close();
    return result;
}

void write_updates_csv(const std::vector<TrackUpdate>& updates, std::ostream& out) {
    out << "time_s,delta_t_ps,delta_u,freq_diff,apriori_sigma_ps,aposteriori_sigma_ps,"
           "qber,significance,slip_recovered,corr_rate_cps\n";
    char line[320];
    for (const auto& u : updates) {
        std::snprintf(line, sizeof line,
                      "%.9f,%.6g,%.9g,%.12g,%.6g,%.6g,%.6g,%.6g,%d,%.6g\n", u.time_s,
                      u.delta_t_ps, u.delta_u, u.freq_diff, u.a_priori_sigma_ps,
                      u.a_posteriori_sigma_ps, u.qber, u.significance, u.slip_recovered ? 1 : 0,
                      u.corr_rate_cps);
        out << line;
    }
}

void write_offsets_csv(const std::vector<std::pair<double, double>>& offsets, std::ostream& out) {
    out << "time_s,offset_ps\n";
    char line[96];
    for (const auto& [t, x] : offsets) {
        std::snprintf(line, sizeof line, "%.9f,%.6f\n", t, x);
        out << line;
    }
}

std::string summary_to_json(const SessionSummary& s) {
    nlohmann::ordered_json j;
    j["initialized"] = s.initialized;
    j["init_freq_diff"] = s.init_freq_diff;
    j["absolute_offset_ps"] = s.absolute_offset_ps;
    j["init_min_qber"] = s.init_min_qber;
    j["updates"] = s.updates;
    j["slips_recovered"] = s.slips_recovered;
    j["tracking_lost"] = s.tracking_lost;
    if (!s.failure.empty())
        j["failure"] = s.failure;
    j["mean_apriori_sigma_ps"] = s.mean_apriori_sigma_ps;
    j["mean_aposteriori_sigma_ps"] = s.mean_aposteriori_sigma_ps;
    j["pooled_aposteriori_sigma_ps"] = s.pooled_aposteriori_sigma_ps;
    j["mean_qber"] = s.mean_qber;
    j["mean_significance"] = s.mean_significance;
    j["mean_corr_rate_cps"] = s.mean_corr_rate_cps;
    j["jitter_budget_ps"] = s.jitter_budget_ps;
    j["sync_jitter_mean_ps"] = s.sync_jitter_mean_ps;
    j["sync_jitter_pooled_ps"] = s.sync_jitter_pooled_ps;
    j["sync_jitter_clamped"] = s.sync_jitter_clamped;
    return j.dump(2) + "\n";
}

} // namespace psync
