#include "pulsesync/config.hpp"
#include "pulsesync/errors.hpp"
#include "pulsesync/ptag_io.hpp"
#include "pulsesync/session.hpp"
#include "pulsesync/stability.hpp"
#include "pulsesync/sweep.hpp"
#include "pulsesync/wire_endpoint.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace psync;

namespace {

int log_threshold() {
    static const int level = [] {
        const char* env = std::getenv("PULSE_SYNC_LOG");
        if (!env)
            return 30;
        const std::string s(env);
        if (s == "debug")
            return 10;
        if (s == "info")
            return 20;
        if (s == "error")
            return 40;
        return 30;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_threshold() <= 20)
        std::fprintf(stderr, "[info] %s\n", msg.c_str());
}

void log_warn(const std::string& msg) {
    if (log_threshold() <= 30)
        std::fprintf(stderr, "[warn] %s\n", msg.c_str());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open " + path + " for writing");
    f << content;
    if (!f)
        throw IoError("failed to write " + path);
}

std::string sibling(const std::string& dir, const char* name) {
    return (fs::path(dir) / name).string();
}

void parse_host_port(const std::string& spec, std::string& host, std::uint16_t& port) {
    const auto colon = spec.rfind(':');
    if (colon == std::string::npos)
        throw ValidationError("remote endpoint must be host:port");
    host = spec.substr(0, colon);
    const int p = std::stoi(spec.substr(colon + 1));
    if (p <= 0 || p > 65535)
        throw ValidationError("remote port out of range");
    port = static_cast<std::uint16_t>(p);
}

double config_jitter_budget(const ExperimentConfig& cfg) {
    return jitter_budget_total_ps({cfg.source.source_jitter_rms_ps,
                                   cfg.detector.detector_jitter_rms_ps,
                                   cfg.detector.adc_jitter_rms_ps});
}

void write_curve(const StabilityCurve& curve, const std::string& dir, const std::string& format) {
    const std::string base = sibling(dir, estimator_name(curve.estimator));
    for (const auto& w : curve.warnings)
        log_warn(w);
    if (format == "json") {
        nlohmann::ordered_json j;
        j["estimator"] = estimator_name(curve.estimator);
        j["tau_s"] = curve.taus_s;
        j["value"] = curve.values;
        j["degenerate"] = curve.degenerate;
        write_file(base + ".json", j.dump(2) + "\n");
    } else {
        std::ostringstream out;
        write_curve_csv(curve, out);
        write_file(base + ".csv", out.str());
    }
}

int cmd_simulate(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.outputs.dir);
    PhotonSimulator sim = cfg.make_simulator();

    std::vector<TimeTagPs> tags;
    std::vector<TruthRecord> truth;
    for (std::uint64_t b = 0; b < sim.block_count(); ++b) {
        TagStream blk = sim.block(b);
        tags.insert(tags.end(), blk.tags.begin(), blk.tags.end());
        truth.insert(truth.end(), blk.truth.begin(), blk.truth.end());
    }

    PtagHeader header;
    header.resolution_ps = cfg.detector.resolution_ps;
    header.f_c_mhz = static_cast<std::uint64_t>(std::llround(cfg.source.clock_rate_hz * 1e3));
    const std::string tag_path = sibling(cfg.outputs.dir, "tags.ptag");
    // Tags from adjacent simulation blocks can interleave by nanoseconds at
    // the seam; the container wants global order.
    std::sort(tags.begin(), tags.end());
    write_ptag_file(tag_path, header, tags);
    write_truth_csv_file(sibling(cfg.outputs.dir, "truth.csv"), truth);
    save_config_file(cfg, sibling(cfg.outputs.dir, "config.json"));

    const double duration = sim.duration_s();
    std::printf("pulses              %llu\n",
                static_cast<unsigned long long>(sim.total_pulses()));
    std::printf("detection prob      %.6g per pulse\n", sim.detection_probability());
    std::printf("signal detections   %zu (%.1f cps)\n", truth.size(),
                static_cast<double>(truth.size()) / duration);
    std::printf("total tags          %zu (%.1f cps)\n", tags.size(),
                static_cast<double>(tags.size()) / duration);
    std::printf("jitter budget       %.2f ps rms\n", sim.combined_jitter_ps());
    std::printf("tags  -> %s\n", tag_path.c_str());
    std::printf("truth -> %s\n", sibling(cfg.outputs.dir, "truth.csv").c_str());
    return 0;
}

void write_session_outputs(const ExperimentConfig& cfg, const SessionResult& result) {
    fs::create_directories(cfg.outputs.dir);
    {
        std::ostringstream out;
        write_updates_csv(result.updates, out);
        write_file(sibling(cfg.outputs.dir, "updates.csv"), out.str());
    }
    {
        std::ostringstream out;
        write_offsets_csv(result.final_state.offset_buffer, out);
        write_file(sibling(cfg.outputs.dir, "offsets.csv"), out.str());
    }
    write_file(sibling(cfg.outputs.dir, "summary.json"), summary_to_json(result.summary));
    save_config_file(cfg, sibling(cfg.outputs.dir, "config.json"));
}

int cmd_sync(const ExperimentConfig& cfg, const std::string& tags_path,
             const std::string& remote) {
    SessionResult result;
    if (!remote.empty()) {
        std::string host;
        std::uint16_t port = 0;
        parse_host_port(remote, host, port);
        log_info("running against sender daemon at " + remote);
        result = run_remote_session(cfg, host, port);
    } else if (!tags_path.empty()) {
        PtagFile file = read_ptag_file(tags_path);
        log_info("loaded " + std::to_string(file.tags.size()) + " tags from " + tags_path);
        SessionRunner runner(cfg.tracker_params(), cfg.make_sequence(),
                             config_jitter_budget(cfg));
        VectorTagSource source(std::move(file.tags));
        result = runner.run(source);
    } else {
        result = run_local_session(cfg);
    }

    write_session_outputs(cfg, result);
    std::fputs(summary_to_json(result.summary).c_str(), stdout);
    if (result.summary.tracking_lost) {
        std::fprintf(stderr, "tracking lost: %s\n", result.summary.failure.c_str());
        return 4;
    }
    return 0;
}

int cmd_allan(const ExperimentConfig& cfg, const std::string& input_csv, bool detrend) {
    std::ifstream in(input_csv);
    if (!in)
        throw IoError("cannot open " + input_csv);
    PhaseSeries series = read_offset_csv(in, fs::path(input_csv).stem().string());
    log_info("series: " + std::to_string(series.x_s.size()) + " samples at " +
             std::to_string(series.sample_interval_s) + " s");
    if (detrend) {
        double slope_ns_per_s = 0.0;
        series = detrend_linear(series, &slope_ns_per_s);
        std::printf("removed linear ramp  %.6g ns/s\n", slope_ns_per_s);
    }

    fs::create_directories(cfg.outputs.dir);
    const auto taus = default_tau_grid(series.x_s.size(), series.sample_interval_s);
    if (taus.empty())
        throw ValidationError("series too short for any averaging time");
    const StabilityCurve m = mdev(series, taus);
    write_curve(m, cfg.outputs.dir, cfg.outputs.format);
    write_curve(tdev(series, taus), cfg.outputs.dir, cfg.outputs.format);
    write_curve(oadev(series, taus), cfg.outputs.dir, cfg.outputs.format);

    nlohmann::ordered_json noise;
    try {
        const NoiseIdentification id = identify_noise(m);
        noise["exponent"] = id.exponent;
        noise["r_squared"] = id.r_squared;
        noise["classification"] = noise_class_name(id.classification);
        std::printf("mdev log-log slope   %.3f (R^2 %.3f) -> %s\n", id.exponent, id.r_squared,
                    noise_class_name(id.classification));
    } catch (const ValidationError& e) {
        noise["classification"] = "unclassified";
        noise["reason"] = e.what();
        std::printf("noise unclassified: %s\n", e.what());
    }
    write_file(sibling(cfg.outputs.dir, "noise.json"), noise.dump(2) + "\n");
    std::printf("curves -> %s/{mdev,tdev,oadev}.%s\n", cfg.outputs.dir.c_str(),
                cfg.outputs.format.c_str());
    return 0;
}

// Minimal column extractor for the per-update CSV written by cmd_sync.
std::vector<double> csv_column(const std::string& path, const std::string& column) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw IoError(path + " is empty");
    std::size_t col = std::string::npos;
    std::stringstream header(line);
    std::string field;
    for (std::size_t i = 0; std::getline(header, field, ','); ++i) {
        if (!field.empty() && field.back() == '\r')
            field.pop_back();
        if (field == column)
            col = i;
    }
    if (col == std::string::npos)
        throw IoError(path + " has no column " + column);
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::stringstream row(line);
        std::string cell;
        for (std::size_t i = 0; i <= col; ++i)
            if (!std::getline(row, cell, ','))
                throw IoError(path + " row has too few columns");
        values.push_back(std::stod(cell));
    }
    return values;
}

int cmd_report(const std::string& session_dir) {
    std::vector<std::string> missing;
    for (const char* name : {"summary.json", "updates.csv", "offsets.csv"})
        if (!fs::exists(fs::path(session_dir) / name))
            missing.push_back(name);
    if (!missing.empty()) {
        std::string list;
        for (const auto& name : missing)
            list += (list.empty() ? "" : ", ") + name;
        throw IoError("session directory " + session_dir + " is missing: " + list);
    }

    nlohmann::json summary;
    {
        std::ifstream f(sibling(session_dir, "summary.json"));
        f >> summary;
    }

    nlohmann::ordered_json report;
    // Static jitter budget, per component when the config is available.
    if (fs::exists(fs::path(session_dir) / "config.json")) {
        const ExperimentConfig cfg = load_config_file(sibling(session_dir, "config.json"));
        nlohmann::ordered_json budget;
        budget["source_ps"] = cfg.source.source_jitter_rms_ps;
        budget["detector_ps"] = cfg.detector.detector_jitter_rms_ps;
        budget["adc_ps"] = cfg.detector.adc_jitter_rms_ps;
        budget["total_ps"] = config_jitter_budget(cfg);
        report["jitter_budget"] = budget;
    } else {
        report["jitter_budget"] = {{"total_ps", summary.value("jitter_budget_ps", 0.0)}};
    }

    report["sync"] = {{"mean_apriori_sigma_ps", summary.value("mean_apriori_sigma_ps", 0.0)},
                      {"mean_aposteriori_sigma_ps",
                       summary.value("mean_aposteriori_sigma_ps", 0.0)},
                      {"sync_jitter_mean_ps", summary.value("sync_jitter_mean_ps", 0.0)},
                      {"sync_jitter_pooled_ps", summary.value("sync_jitter_pooled_ps", 0.0)},
                      {"updates", summary.value("updates", std::size_t{0})},
                      {"slips_recovered", summary.value("slips_recovered", std::size_t{0})}};

    // Time deviation of the tracked offset record, reported next to the
    // free-running quartz reference line for context (no equality implied).
    {
        std::ifstream f(sibling(session_dir, "offsets.csv"));
        const PhaseSeries series = read_offset_csv(f, "offsets");
        const auto taus = default_tau_grid(series.x_s.size(), series.sample_interval_s);
        if (!taus.empty()) {
            const StabilityCurve t = tdev(series, taus);
            std::size_t near = 0;
            for (std::size_t i = 0; i < t.taus_s.size(); ++i)
                if (std::abs(std::log(t.taus_s[i])) < std::abs(std::log(t.taus_s[near])))
                    near = i;
            if (!t.values.empty())
                report["tdev"] = {{"tau_s", t.taus_s[near]},
                                  {"tdev_ps", t.values[near] * 1e12},
                                  {"reference_free_running_tdev_1s_ps", 19.0}};
        }
    }

    const auto sig = csv_column(sibling(session_dir, "updates.csv"), "significance");
    const auto qber = csv_column(sibling(session_dir, "updates.csv"), "qber");
    auto stats = [](const std::vector<double>& v) {
        nlohmann::ordered_json j;
        if (v.empty())
            return j;
        double sum = 0.0, lo = v[0], hi = v[0];
        for (double x : v) {
            sum += x;
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        j["mean"] = sum / static_cast<double>(v.size());
        j["min"] = lo;
        j["max"] = hi;
        return j;
    };
    report["significance"] = stats(sig);
    report["qber"] = stats(qber);

    const std::string out = report.dump(2) + "\n";
    write_file(sibling(session_dir, "report.json"), out);
    std::fputs(out.c_str(), stdout);
    return 0;
}

int cmd_serve_sender(const ExperimentConfig& cfg, std::uint16_t port, int sessions) {
    const SymbolSequence seq = cfg.make_sequence();
    TcpListener listener(port);
    std::printf("listening on %u\n", listener.port());
    std::fflush(stdout);
    for (int i = 0; i < sessions; ++i) {
        TcpConnection conn = listener.accept_one();
        const SenderSessionStats stats = serve_sender_session(conn, seq);
        std::printf("session %d: state=%s tag_frames=%llu tags=%llu status_frames=%llu "
                    "reveals=%d init=%d\n",
                    i, session_state_name(stats.final_state),
                    static_cast<unsigned long long>(stats.tag_frames),
                    static_cast<unsigned long long>(stats.tags_received),
                    static_cast<unsigned long long>(stats.status_frames), stats.reveals,
                    stats.init_received ? 1 : 0);
        std::fflush(stdout);
    }
    return 0;
}

int cmd_serve_receiver(const ExperimentConfig& cfg, std::uint16_t port) {
    PhotonSimulator sim = cfg.make_simulator();
    TcpListener listener(port);
    std::printf("listening on %u\n", listener.port());
    std::fflush(stdout);
    TcpConnection conn = listener.accept_one();
    serve_receiver_session(conn, sim);
    std::printf("streamed %llu blocks\n", static_cast<unsigned long long>(sim.block_count()));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clock synchronization for pulsed single-photon sources: simulator, "
                 "post-processing sync engine, stability analysis and wire daemons"};
    app.require_subcommand(1);

    std::string config_path, out_dir, format, tags_path, remote, allan_input, session_dir;
    std::uint64_t seed = 0;
    bool detrend = false;
    int sessions = 1;
    std::uint16_t port = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON experiment config path");
        cmd->add_option("--seed", seed, "override the experiment seed");
        cmd->add_option("--out", out_dir, "override the output directory");
        cmd->add_option("--format", format, "tabular output format")
            ->check(CLI::IsMember({"csv", "json"}));
        return cmd;
    };

    auto* sim_cmd = add_common(app.add_subcommand(
        "simulate", "Generate a tag file and truth sidecar from the configured source"));
    auto* sync_cmd = add_common(app.add_subcommand(
        "sync", "Initialize and track a session; writes per-update CSV and a summary"));
    auto* tags_opt = sync_cmd->add_option(
        "--tags", tags_path, "read tags from a PTAG file instead of simulating");
    sync_cmd
        ->add_option("--remote", remote,
                     "host:port of a sender daemon for the two-process handshake")
        ->excludes(tags_opt);
    auto* allan_cmd = add_common(app.add_subcommand(
        "allan", "Stability curves (MDEV/TDEV/OADEV) and noise class of an offset CSV"));
    allan_cmd->add_option("input", allan_input, "CSV with time_s and offset_ps columns")
        ->required();
    allan_cmd->add_flag("--detrend", detrend, "remove the linear ramp first");
    auto* report_cmd =
        app.add_subcommand("report", "Aggregate a completed session directory into one JSON");
    report_cmd->add_option("dir", session_dir, "session output directory")->required();
    auto* sender_cmd = add_common(app.add_subcommand(
        "serve-sender", "Sender daemon: owns the symbol sequence, answers sync clients"));
    sender_cmd->add_option("--port", port, "listen port (0 picks one and prints it)");
    sender_cmd->add_option("--sessions", sessions, "number of sessions to serve before exiting");
    auto* receiver_cmd = add_common(app.add_subcommand(
        "serve-receiver", "Receiver daemon: streams simulated detections as TAGS frames"));
    receiver_cmd->add_option("--port", port, "listen port (0 picks one and prints it)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg = config_path.empty() ? default_config() : load_config_file(config_path);
        if (sim_cmd->count("--seed") || sync_cmd->count("--seed") ||
            sender_cmd->count("--seed") || receiver_cmd->count("--seed") ||
            allan_cmd->count("--seed"))
            cfg.seed = seed;
        if (!out_dir.empty())
            cfg.outputs.dir = out_dir;
        if (!format.empty())
            cfg.outputs.format = format;
        cfg.validate();

        if (*sim_cmd)
            return cmd_simulate(cfg);
        if (*sync_cmd)
            return cmd_sync(cfg, tags_path, remote);
        if (*allan_cmd)
            return cmd_allan(cfg, allan_input, detrend);
        if (*report_cmd)
            return cmd_report(session_dir);
        if (*sender_cmd)
            return cmd_serve_sender(cfg, port, sessions);
        if (*receiver_cmd)
            return cmd_serve_receiver(cfg, port);
        return 2;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const SweepFailedError& e) {
        std::fprintf(stderr, "initialization failed: %s\n", e.what());
        return 3;
    } catch (const NoPeakError& e) {
        std::fprintf(stderr, "initialization failed: %s\n", e.what());
        return 3;
    } catch (const AlignmentFailedError& e) {
        std::fprintf(stderr, "initialization failed: %s\n", e.what());
        return 3;
    } catch (const ResyncRequiredError& e) {
        std::fprintf(stderr, "tracking lost: %s\n", e.what());
        return 4;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
