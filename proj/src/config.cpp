#include "pulsesync/config.hpp"

#include "pulsesync/errors.hpp"
#include "pulsesync/ptag_io.hpp"
#include "pulsesync/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace psync {

namespace {

using nlohmann::json;

// Seed streams for components derived from the experiment seed.
constexpr std::uint64_t kSenderClockStream = 1;
constexpr std::uint64_t kReceiverClockStream = 2;
constexpr std::uint64_t kSimulatorStream = 3;

void reject_unknown_keys(const json& j, const char* block,
                         std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw ValidationError(std::string("unknown config key ") + block + "." + item.key());
    }
}

double get_num(const json& j, const char* key, double fallback) {
    auto it = j.find(key);
    if (it == j.end())
        return fallback;
    if (!it->is_number())
        throw ValidationError(std::string("config field ") + key + " must be a number");
    return it->get<double>();
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t fallback) {
    auto it = j.find(key);
    if (it == j.end())
        return fallback;
    if (!it->is_number_unsigned())
        throw ValidationError(std::string("config field ") + key +
                              " must be a non-negative integer");
    return it->get<std::uint64_t>();
}

std::string get_str(const json& j, const char* key, const std::string& fallback) {
    auto it = j.find(key);
    if (it == j.end())
        return fallback;
    if (!it->is_string())
        throw ValidationError(std::string("config field ") + key + " must be a string");
    return it->get<std::string>();
}

ClockSpec clock_from_json(const json& j, const ClockSpec& fallback) {
    reject_unknown_keys(j, "clock",
                        {"preset", "kind", "fractional_offset", "linear_drift_rate_per_s",
                         "white_fm_amp", "flicker_fm_amp", "random_walk_fm_amp",
                         "sample_interval_s", "seed"});
    ClockSpec spec = fallback;
    if (j.contains("preset")) {
        const auto name = get_str(j, "preset", "");
        if (name == "ideal")
            spec = ClockSpec::ideal();
        else if (name == "quartz")
            spec = ClockSpec::quartz(0);
        else if (name == "rubidium")
            spec = ClockSpec::rubidium(0);
        else
            throw ValidationError("unknown clock preset: " + name);
    }
    if (j.contains("kind"))
        spec.kind = clock_kind_from_name(get_str(j, "kind", ""));
    spec.fractional_offset = get_num(j, "fractional_offset", spec.fractional_offset);
    spec.linear_drift_rate = get_num(j, "linear_drift_rate_per_s", spec.linear_drift_rate);
    spec.white_fm_amp = get_num(j, "white_fm_amp", spec.white_fm_amp);
    spec.flicker_fm_amp = get_num(j, "flicker_fm_amp", spec.flicker_fm_amp);
    spec.random_walk_fm_amp = get_num(j, "random_walk_fm_amp", spec.random_walk_fm_amp);
    spec.sample_interval_s = get_num(j, "sample_interval_s", spec.sample_interval_s);
    spec.seed = get_u64(j, "seed", spec.seed);
    return spec;
}

json clock_to_json(const ClockSpec& spec) {
    return json{{"kind", clock_kind_name(spec.kind)},
                {"fractional_offset", spec.fractional_offset},
                {"linear_drift_rate_per_s", spec.linear_drift_rate},
                {"white_fm_amp", spec.white_fm_amp},
                {"flicker_fm_amp", spec.flicker_fm_amp},
                {"random_walk_fm_amp", spec.random_walk_fm_amp},
                {"sample_interval_s", spec.sample_interval_s},
                {"seed", spec.seed}};
}

} // namespace

const char* clock_kind_name(ClockKind kind) {
    switch (kind) {
    case ClockKind::Ideal: return "ideal";
    case ClockKind::Quartz: return "quartz";
    case ClockKind::Rubidium: return "rubidium";
    }
    return "?";
}

ClockKind clock_kind_from_name(const std::string& name) {
    if (name == "ideal")
        return ClockKind::Ideal;
    if (name == "quartz")
        return ClockKind::Quartz;
    if (name == "rubidium")
        return ClockKind::Rubidium;
    throw ValidationError("unknown clock kind: " + name);
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    // Free-running quartz pair, -1e-5 relative offset and 2.5e-10/s relative
    // drift between them; clock seeds 0 mean "derive from the experiment
    // seed" at build time.
    c.sender_clock = ClockSpec::quartz(0);
    c.sender_clock.fractional_offset = 4e-6;
    c.receiver_clock = ClockSpec::quartz(0);
    c.receiver_clock.fractional_offset = -6e-6;
    c.receiver_clock.linear_drift_rate = -c.receiver_clock.linear_drift_rate;
    c.channel.propagation_delay_ps = 50000.0;
    c.channel.fiber_length_m = 10.0;
    return c;
}

void ExperimentConfig::validate() const {
    sender_clock.validate();
    receiver_clock.validate();
    tracker_params().validate();
    if (!(session.duration_s >= session.update_time_s))
        throw ValidationError("session duration must cover at least one update window");
    if (!(session.duration_s > session.acquisition_time_s))
        throw ValidationError("session duration must exceed the acquisition time");
    if (outputs.format != "csv" && outputs.format != "json")
        throw ValidationError("output format must be csv or json");
    if (sequence.symbols.empty() && sequence.length == 0)
        throw ValidationError("sequence length must be positive");
    make_sequence();
}

SymbolSequence ExperimentConfig::make_sequence() const {
    if (!sequence.symbols.empty()) {
        SymbolSequence seq;
        seq.symbols.reserve(sequence.symbols.size());
        for (char c : sequence.symbols)
            seq.symbols.push_back(symbol_from_letter(c));
        return seq;
    }
    return SymbolSequence::from_seed(sequence.seed, sequence.length);
}

TrackerParams ExperimentConfig::tracker_params() const {
    TrackerParams p;
    p.f_c_nominal_hz = source.clock_rate_hz;
    p.update_time_s = session.update_time_s;
    p.acquisition_time_s = session.acquisition_time_s;
    p.bin_ps = session.bin_ps;
    p.corr_window_ps = session.corr_window_ps;
    p.qber_slip_threshold = session.qber_slip_threshold;
    p.qber_accept = session.qber_accept;
    p.slip_k_max = session.slip_k_max;
    p.sweep.range = session.sweep_range;
    p.sweep.step = session.sweep_step;
    p.sweep.bin_ps = session.bin_ps;
    p.sweep.s_threshold = session.significance_threshold;
    return p;
}

ClockSpec ExperimentConfig::resolved_sender_clock() const {
    ClockSpec spec = sender_clock;
    if (spec.seed == 0)
        spec.seed = derive_seed(seed, kSenderClockStream);
    return spec;
}

ClockSpec ExperimentConfig::resolved_receiver_clock() const {
    ClockSpec spec = receiver_clock;
    if (spec.seed == 0)
        spec.seed = derive_seed(seed, kReceiverClockStream);
    return spec;
}

PhotonSimulator ExperimentConfig::make_simulator() const {
    SourceParams src = source;
    src.sender_clock = resolved_sender_clock();
    DetectorParams det = detector;
    det.receiver_clock = resolved_receiver_clock();
    return PhotonSimulator(src, channel, det, make_sequence(), session.duration_s,
                           derive_seed(seed, kSimulatorStream));
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ValidationError("config root must be a JSON object");
    reject_unknown_keys(j, "config",
                        {"seed", "clocks", "source", "channel", "detector", "sequence",
                         "session", "outputs"});

    ExperimentConfig c = default_config();
    c.seed = get_u64(j, "seed", c.seed);

    if (j.contains("clocks")) {
        const json& jc = j["clocks"];
        reject_unknown_keys(jc, "clocks", {"sender", "receiver"});
        if (jc.contains("sender"))
            c.sender_clock = clock_from_json(jc["sender"], c.sender_clock);
        if (jc.contains("receiver"))
            c.receiver_clock = clock_from_json(jc["receiver"], c.receiver_clock);
    }
    if (j.contains("source")) {
        const json& js = j["source"];
        reject_unknown_keys(js, "source",
                            {"clock_rate_hz", "mean_photon_number", "source_jitter_rms_ps"});
        c.source.clock_rate_hz = get_num(js, "clock_rate_hz", c.source.clock_rate_hz);
        c.source.mean_photon_number =
            get_num(js, "mean_photon_number", c.source.mean_photon_number);
        c.source.source_jitter_rms_ps =
            get_num(js, "source_jitter_rms_ps", c.source.source_jitter_rms_ps);
    }
    if (j.contains("channel")) {
        const json& jc = j["channel"];
        reject_unknown_keys(jc, "channel",
                            {"loss_db", "background_rate_cps", "propagation_delay_ps",
                             "fiber_length_m", "thermo_optic_per_k", "expansion_per_k",
                             "refractive_index", "wavelength_m", "temp_offset_k",
                             "temp_amplitude_k", "temp_period_s"});
        c.channel.loss_db = get_num(jc, "loss_db", c.channel.loss_db);
        c.channel.background_rate_cps =
            get_num(jc, "background_rate_cps", c.channel.background_rate_cps);
        c.channel.propagation_delay_ps =
            get_num(jc, "propagation_delay_ps", c.channel.propagation_delay_ps);
        c.channel.fiber_length_m = get_num(jc, "fiber_length_m", c.channel.fiber_length_m);
        c.channel.thermo_optic_per_k =
            get_num(jc, "thermo_optic_per_k", c.channel.thermo_optic_per_k);
        c.channel.expansion_per_k = get_num(jc, "expansion_per_k", c.channel.expansion_per_k);
        c.channel.refractive_index = get_num(jc, "refractive_index", c.channel.refractive_index);
        c.channel.wavelength_m = get_num(jc, "wavelength_m", c.channel.wavelength_m);
        c.channel.temp_offset_k = get_num(jc, "temp_offset_k", c.channel.temp_offset_k);
        c.channel.temp_amplitude_k = get_num(jc, "temp_amplitude_k", c.channel.temp_amplitude_k);
        c.channel.temp_period_s = get_num(jc, "temp_period_s", c.channel.temp_period_s);
    }
    if (j.contains("detector")) {
        const json& jd = j["detector"];
        reject_unknown_keys(jd, "detector",
                            {"detector_jitter_rms_ps", "adc_jitter_rms_ps", "dead_time_ps",
                             "resolution_ps"});
        c.detector.detector_jitter_rms_ps =
            get_num(jd, "detector_jitter_rms_ps", c.detector.detector_jitter_rms_ps);
        c.detector.adc_jitter_rms_ps =
            get_num(jd, "adc_jitter_rms_ps", c.detector.adc_jitter_rms_ps);
        c.detector.dead_time_ps = get_num(jd, "dead_time_ps", c.detector.dead_time_ps);
        c.detector.resolution_ps = static_cast<std::uint32_t>(
            get_u64(jd, "resolution_ps", c.detector.resolution_ps));
    }
    if (j.contains("sequence")) {
        const json& js = j["sequence"];
        reject_unknown_keys(js, "sequence", {"length", "seed", "symbols"});
        c.sequence.length =
            static_cast<std::size_t>(get_u64(js, "length", c.sequence.length));
        c.sequence.seed = get_u64(js, "seed", c.sequence.seed);
        c.sequence.symbols = get_str(js, "symbols", c.sequence.symbols);
    }
    if (j.contains("session")) {
        const json& js = j["session"];
        reject_unknown_keys(js, "session",
                            {"duration_s", "acquisition_time_s", "update_time_s", "sweep_range",
                             "sweep_step", "bin_ps", "corr_window_ps", "significance_threshold",
                             "qber_slip_threshold", "qber_accept", "slip_k_max"});
        c.session.duration_s = get_num(js, "duration_s", c.session.duration_s);
        c.session.acquisition_time_s =
            get_num(js, "acquisition_time_s", c.session.acquisition_time_s);
        c.session.update_time_s = get_num(js, "update_time_s", c.session.update_time_s);
        c.session.sweep_range = get_num(js, "sweep_range", c.session.sweep_range);
        c.session.sweep_step = get_num(js, "sweep_step", c.session.sweep_step);
        c.session.bin_ps = get_num(js, "bin_ps", c.session.bin_ps);
        c.session.corr_window_ps = get_num(js, "corr_window_ps", c.session.corr_window_ps);
        c.session.significance_threshold =
            get_num(js, "significance_threshold", c.session.significance_threshold);
        c.session.qber_slip_threshold =
            get_num(js, "qber_slip_threshold", c.session.qber_slip_threshold);
        c.session.qber_accept = get_num(js, "qber_accept", c.session.qber_accept);
        c.session.slip_k_max =
            static_cast<int>(get_num(js, "slip_k_max", c.session.slip_k_max));
    }
    if (j.contains("outputs")) {
        const json& jo = j["outputs"];
        reject_unknown_keys(jo, "outputs", {"dir", "format"});
        c.outputs.dir = get_str(jo, "dir", c.outputs.dir);
        c.outputs.format = get_str(jo, "format", c.outputs.format);
    }
    c.validate();
    return c;
}

std::string serialize_config(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["clocks"] = json{{"sender", clock_to_json(c.sender_clock)},
                       {"receiver", clock_to_json(c.receiver_clock)}};
    j["source"] = json{{"clock_rate_hz", c.source.clock_rate_hz},
                       {"mean_photon_number", c.source.mean_photon_number},
                       {"source_jitter_rms_ps", c.source.source_jitter_rms_ps}};
    j["channel"] = json{{"loss_db", c.channel.loss_db},
                        {"background_rate_cps", c.channel.background_rate_cps},
                        {"propagation_delay_ps", c.channel.propagation_delay_ps},
                        {"fiber_length_m", c.channel.fiber_length_m},
                        {"thermo_optic_per_k", c.channel.thermo_optic_per_k},
                        {"expansion_per_k", c.channel.expansion_per_k},
                        {"refractive_index", c.channel.refractive_index},
                        {"wavelength_m", c.channel.wavelength_m},
                        {"temp_offset_k", c.channel.temp_offset_k},
                        {"temp_amplitude_k", c.channel.temp_amplitude_k},
                        {"temp_period_s", c.channel.temp_period_s}};
    j["detector"] = json{{"detector_jitter_rms_ps", c.detector.detector_jitter_rms_ps},
                         {"adc_jitter_rms_ps", c.detector.adc_jitter_rms_ps},
                         {"dead_time_ps", c.detector.dead_time_ps},
                         {"resolution_ps", c.detector.resolution_ps}};
    j["sequence"] = json{{"length", c.sequence.length}, {"seed", c.sequence.seed}};
    if (!c.sequence.symbols.empty())
        j["sequence"]["symbols"] = c.sequence.symbols;
    j["session"] = json{{"duration_s", c.session.duration_s},
                        {"acquisition_time_s", c.session.acquisition_time_s},
                        {"update_time_s", c.session.update_time_s},
                        {"sweep_range", c.session.sweep_range},
                        {"sweep_step", c.session.sweep_step},
                        {"bin_ps", c.session.bin_ps},
                        {"corr_window_ps", c.session.corr_window_ps},
                        {"significance_threshold", c.session.significance_threshold},
                        {"qber_slip_threshold", c.session.qber_slip_threshold},
                        {"qber_accept", c.session.qber_accept},
                        {"slip_k_max", c.session.slip_k_max}};
    j["outputs"] = json{{"dir", c.outputs.dir}, {"format", c.outputs.format}};
    return j.dump(2) + "\n";
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw IoError("cannot open config file " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config(buf.str());
}

void save_config_file(const ExperimentConfig& config, const std::string& path) {
    std::ofstream f(path);
    if (!f)
        throw IoError("cannot open " + path + " for writing");
    f << serialize_config(config);
    if (!f)
        throw IoError("failed to write config file " + path);
}

} // namespace psync
