#include "neuroarm/session.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "neuroarm/dataset.hpp"
#include "neuroarm/dsp.hpp"

namespace neuroarm::app {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::array<ActionLabel, kNumActions> kActions{
    ActionLabel::PickUpCup, ActionLabel::ShakeHands, ActionLabel::StayIdle};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json loss_to_json(const net::LossStats& loss) {
    return {{"received", loss.received},
            {"gaps", loss.gaps},
            {"reorders", loss.reorders},
            {"format_errors", loss.format_errors}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for write: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

void write_manifest_json(const std::string& out_dir, json manifest) {
    manifest["version"] = kHarnessVersion;
    manifest["created_utc"] = utc_now();
    write_text(join(out_dir, "manifest.json"), manifest.dump(2) + "\n");
}

std::map<std::string, ActionLabel> action_files(const std::string& data_dir) {
    std::map<std::string, ActionLabel> files;
    for (ActionLabel a : kActions)
        files[join(data_dir, std::string(action_name(a)) + ".csv")] = a;
    return files;
}

/// Cumulative sample boundaries of a script at a given rate; size
/// blocks+1, starting at 0.
std::vector<std::uint64_t> block_edges(const StateScript& script, double rate) {
    std::vector<std::uint64_t> edges{0};
    for (const auto& b : script.blocks)
        edges.push_back(edges.back() +
                        static_cast<std::uint64_t>(std::llround(b.seconds * rate)));
    return edges;
}

/// Index of the block containing sample s, or -1 past the end.
int block_of(const std::vector<std::uint64_t>& edges, std::uint64_t s) {
    for (std::size_t k = 0; k + 1 < edges.size(); ++k)
        if (s >= edges[k] && s < edges[k + 1]) return static_cast<int>(k);
    return -1;
}

}  // namespace

double StateScript::total_seconds() const {
    double total = 0.0;
    for (const auto& b : blocks) total += b.seconds;
    return total;
}

BrainState StateScript::state_at(double t_s) const {
    if (blocks.empty()) throw ConfigError("empty state script");
    double edge = 0.0;
    for (const auto& b : blocks) {
        edge += b.seconds;
        if (t_s < edge) return b.state;
    }
    return blocks.back().state;
}

StateScript collect_script(const HarnessConfig& cfg) {
    StateScript script;
    for (ActionLabel a : kActions)
        script.blocks.push_back({to_state(a), cfg.collect_seconds_per_action});
    return script;
}

StateScript run_script(const HarnessConfig& cfg) {
    const std::array<BrainState, 3> cycle{BrainState::Idle, BrainState::RelaxedHandshake,
                                          BrainState::ConcentratedCup};
    StateScript script;
    double remaining = cfg.run_seconds;
    for (std::size_t k = 0; remaining > 1e-9; ++k) {
        const double dwell = std::min(cfg.run_block_seconds, remaining);
        script.blocks.push_back({cycle[k % cycle.size()], dwell});
        remaining -= dwell;
    }
    return script;
}

std::vector<dsp::FeatureVector> synthesize_features(const HarnessConfig& cfg,
                                                    const StateScript& script,
                                                    std::uint64_t seed) {
    synth::SignalGenerator gen(cfg.profiles, cfg.noise, seed, cfg.sample_rate_hz);
    dsp::StreamingCleaner cleaner(cfg.sample_rate_hz, cfg.noise.mains_freq);
    dsp::FeatureExtractor extractor(cfg.fft_window, cfg.hop, cfg.sample_rate_hz,
                                    dsp::Taper::Hann);

    std::vector<dsp::FeatureVector> features;
    const auto edges = block_edges(script, cfg.sample_rate_hz);
    for (std::size_t k = 0; k < script.blocks.size(); ++k) {
        gen.set_state(script.blocks[k].state);
        std::uint64_t left = edges[k + 1] - edges[k];
        while (left > 0) {
            const int n = static_cast<int>(std::min<std::uint64_t>(left, 4096));
            const auto frames = extractor.push(cleaner.process(gen.next_chunk(n)));
            features.insert(features.end(), frames.begin(), frames.end());
            left -= static_cast<std::uint64_t>(n);
        }
    }
    return features;
}

CollectResult cmd_collect(const HarnessConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    ensure_dir(out_dir);

    const StateScript script = collect_script(cfg);
    const auto features = synthesize_features(cfg, script, derive_seed(cfg.seed, 1));
    const auto edges = block_edges(script, cfg.sample_rate_hz);

    net::UdpReceiver rx(cfg.udp_port, cfg.udp_host);
    std::atomic<bool> producer_done{false};
    std::thread producer([&] {
        net::UdpSender tx(cfg.udp_host, rx.port());
        net::stream_producer(tx, features, cfg.frames_per_s(), cfg.time_scale);
        producer_done = true;
    });

    net::FrameConsumer consumer(rx);
    std::map<ActionLabel, std::vector<data::LabeledRecord>> records;
    CollectResult result;
    for (;;) {
        const auto frame = consumer.poll(std::chrono::milliseconds(50));
        if (!frame) {
            if (producer_done) break;
            continue;
        }
        const std::uint64_t start = frame->index * static_cast<std::uint64_t>(cfg.hop);
        const std::uint64_t last = start + static_cast<std::uint64_t>(cfg.fft_window) - 1;
        const int a = block_of(edges, start);
        const int b = block_of(edges, last);
        if (a < 0 || b < 0 || a != b) {
            ++result.dropped_boundary_frames;
            continue;
        }
        data::LabeledRecord rec;
        rec.index = frame->index;
        rec.features = frame->values;
        rec.label = to_action(script.blocks[static_cast<std::size_t>(a)].state);
        records[rec.label].push_back(rec);
    }
    producer.join();
    result.loss = consumer.stats();

    std::map<std::string, std::string> artifacts;
    for (ActionLabel a : kActions) {
        const std::string path = join(out_dir, std::string(action_name(a)) + ".csv");
        data::append_records(path, records[a]);
        result.files[a] = path;
        result.rows[a] = records[a].size();
        artifacts[std::string(action_name(a)) + "_csv"] = path;
    }

    write_manifest(out_dir, "collect", cfg, {}, artifacts);
    return result;
}

TrainResult cmd_train(const HarnessConfig& cfg, const std::string& data_dir,
                      const std::string& out_dir, bool with_ffnn,
                      const std::vector<int>& sweep_sizes) {
    cfg.validate();
    ensure_dir(out_dir);

    const auto files = action_files(data_dir);
    const auto ds = data::build_split(files, cfg.win_size, cfg.test_fraction, cfg.seed);
    auto [params, history] = model::train(ds, cfg.model, cfg.train, cfg.seed);

    TrainResult result;
    result.history = std::move(history);
    result.test_accuracy = model::evaluate(params, ds.test).accuracy;
    result.model_path = join(out_dir, "model.bin");
    result.history_path = join(out_dir, "history.csv");
    model::save_model(result.model_path, params, ds.standardizer);
    model::save_history(result.history_path, result.history);

    std::map<std::string, std::string> artifacts{{"model", result.model_path},
                                                 {"history", result.history_path}};

    if (with_ffnn) {
        model::FfnnConfig fcfg;
        fcfg.win_size = cfg.win_size;
        const auto [fparams, fhistory] = model::train_ffnn(ds, fcfg, cfg.train, cfg.seed);
        result.ffnn_test_accuracy = model::evaluate_ffnn(fparams, ds.test).accuracy;
        const std::string fpath = join(out_dir, "ffnn_history.csv");
        model::save_history(fpath, fhistory);
        artifacts["ffnn_history"] = fpath;
    }

    if (!sweep_sizes.empty()) {
        result.sweep = model::window_size_study(files, sweep_sizes, cfg.model, cfg.train,
                                                cfg.test_fraction, cfg.seed);
        std::string csv = "win_size,test_accuracy\n";
        for (const auto& r : result.sweep)
            csv += std::to_string(r.win_size) + "," + format_sig9(r.test_accuracy) + "\n";
        const std::string spath = join(out_dir, "window_sweep.csv");
        write_text(spath, csv);
        artifacts["window_sweep"] = spath;
    }

    std::map<std::string, std::string> inputs;
    for (const auto& [path, label] : files) inputs[action_name(label)] = path;
    write_manifest(out_dir, "train", cfg, inputs, artifacts);
    return result;
}

EvalResult cmd_eval(const std::string& model_path, const std::string& data_dir,
                    const std::string& out_dir) {
    ensure_dir(out_dir);
    const auto [params, standardizer] = model::load_model(model_path);

    std::vector<data::WindowTensor> windows;
    for (const auto& [path, label] : action_files(data_dir)) {
        const auto records = data::load_action_file(path, label);
        Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()), kFeatureDim);
        std::vector<ActionLabel> y(records.size());
        for (std::size_t r = 0; r < records.size(); ++r) {
            y[r] = records[r].label;
            for (int c = 0; c < kFeatureDim; ++c)
                x(static_cast<Eigen::Index>(r), c) = records[r].features[static_cast<std::size_t>(c)];
        }
        const auto standardized = standardizer.apply(x);
        auto w = data::segment_dataset(standardized, y, params.cfg.win_size, 0,
                                       data::SegmentMode::ZeroOverlap);
        windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                       std::make_move_iterator(w.end()));
    }

    EvalResult result;
    result.report = model::evaluate(params, windows);
    result.text_path = join(out_dir, "eval_report.txt");
    result.json_path = join(out_dir, "eval_report.json");
    write_text(result.text_path, result.report.to_text());
    write_text(result.json_path, result.report.to_json() + "\n");

    write_manifest(out_dir, "eval", {{"model", model_path}, {"data_dir", data_dir}},
                   {{"report_text", result.text_path}, {"report_json", result.json_path}});
    return result;
}

RunResult cmd_run(const HarnessConfig& cfg, const std::string& model_path,
                  const std::string& out_dir) {
    cfg.validate();
    ensure_dir(out_dir);

    const auto [params, standardizer] = model::load_model(model_path);
    const StateScript script = run_script(cfg);
    const auto features = synthesize_features(cfg, script, derive_seed(cfg.seed, 2));
    const double fps = cfg.frames_per_s();

    net::UdpReceiver rx(cfg.udp_port, cfg.udp_host);
    std::atomic<bool> producer_done{false};
    std::thread producer([&] {
        net::UdpSender tx(cfg.udp_host, rx.port());
        net::stream_producer(tx, features, fps, cfg.time_scale);
        producer_done = true;
    });

    net::SerialChannel serial(cfg.serial_latency_s);
    act::Actuator arm(act::default_trajectories(), cfg.action_duration_s);
    std::vector<act::ActuatorEvent> log;
    std::thread arm_task(
        [&] { log = act::run_actuator(serial, arm, cfg.emit_period_s, 100.0); });

    RunResult result;
    net::FrameConsumer consumer(rx);
    model::StreamPredictor predictor(params, standardizer, fps, cfg.emit_period_s);
    std::vector<std::pair<double, ActionLabel>> emitted;
    double last_stream_t = 0.0;
    double starved_gap_s = 0.0;
    for (;;) {
        const auto frame = consumer.poll(std::chrono::milliseconds(50));
        if (!frame) {
            if (producer_done) break;
            // Estimate how much session time the silence covers.
            starved_gap_s += 0.05 * (cfg.time_scale > 0.0 ? cfg.time_scale : 1.0);
            if (predictor.starved(last_stream_t + starved_gap_s)) {
                char msg[96];
                std::snprintf(msg, sizeof msg, "stream starved near t=%.1fs, no label emitted",
                              last_stream_t + starved_gap_s);
                result.warnings.push_back(msg);
            }
            continue;
        }
        starved_gap_s = 0.0;
        last_stream_t = static_cast<double>(frame->index) / fps;
        if (const auto label = predictor.push(*frame, last_stream_t)) {
            emitted.emplace_back(last_stream_t, *label);
            net::send_action(serial, *label);
        }
    }
    serial.close();
    arm_task.join();
    producer.join();
    result.loss = consumer.stats();
    result.emissions = predictor.emissions();

    for (const auto& [t, label] : emitted) {
        const ActionLabel truth = to_action(script.state_at(t));
        auto& score = result.per_action[truth];
        ++score.attempts;
        if (label == truth) ++score.successes;
    }

    result.event_log_path = join(out_dir, "events.log");
    std::string lines;
    for (const auto& ev : log) lines += act::format_event(ev) + "\n";
    write_text(result.event_log_path, lines);

    json report;
    report["emissions"] = result.emissions;
    for (ActionLabel a : kActions) {
        const auto& score = result.per_action[a];
        report["per_action"][action_name(a)] = {{"attempts", score.attempts},
                                                {"successes", score.successes},
                                                {"rate", score.rate()}};
    }
    report["loss"] = loss_to_json(result.loss);
    report["warnings"] = result.warnings;
    // Human-subject EEG reference triples from comparable published work,
    // for side-by-side context only; this harness does not reproduce them.
    report["reference_success_rates"] = {
        {"headline_percent", {{"stayStationary", 91}, {"shakeHands", 85}, {"pickUpCup", 84}}},
        {"per_class_recall", {{"stayStationary", 0.92}, {"shakeHands", 0.86}, {"pickUpCup", 0.82}}},
        {"long_run_percent", {{"stayStationary", 90}, {"shakeHands", 80}, {"pickUpCup", 80}}}};
    result.report_path = join(out_dir, "run_report.json");
    write_text(result.report_path, report.dump(2) + "\n");

    write_manifest(out_dir, "run", cfg, {{"model", model_path}},
                   {{"event_log", result.event_log_path}, {"report", result.report_path}});
    return result;
}

namespace {

const std::array<const char*, act::kNumJoints> kJointNames{"shoulder", "elbow", "wrist", "grip"};
const std::array<const char*, act::kNumJoints> kJointColors{"#1f77b4", "#ff7f0e", "#2ca02c",
                                                            "#d62728"};

std::string trajectory_svg(const std::vector<act::ActuatorEvent>& samples,
                           const std::vector<act::ActuatorEvent>& transitions) {
    constexpr double w = 900, h = 360;
    constexpr double left = 55, right = 880, top = 30, bottom = 320;
    const double t_max = samples.empty() ? 1.0 : std::max(1e-9, samples.back().t);
    const auto sx = [&](double t) { return left + (right - left) * t / t_max; };
    const auto sy = [&](double deg) {
        return bottom - (bottom - top) * deg / act::kJointMaxDeg;
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left
        << "\" height=\"" << bottom - top << "\" fill=\"none\" stroke=\"#999\"/>\n";

    for (int deg = 0; deg <= 180; deg += 45) {
        svg << "<line x1=\"" << left << "\" y1=\"" << sy(deg) << "\" x2=\"" << right << "\" y2=\""
            << sy(deg) << "\" stroke=\"#eee\"/>\n"
            << "<text x=\"" << left - 8 << "\" y=\"" << sy(deg) + 4
            << "\" font-size=\"11\" text-anchor=\"end\" fill=\"#444\">" << deg << "</text>\n";
    }
    const double t_step = t_max > 60.0 ? 60.0 : (t_max > 10.0 ? 10.0 : 1.0);
    for (double t = 0.0; t <= t_max + 1e-9; t += t_step)
        svg << "<text x=\"" << sx(t) << "\" y=\"" << bottom + 16
            << "\" font-size=\"11\" text-anchor=\"middle\" fill=\"#444\">" << t << "s</text>\n";

    for (const auto& ev : transitions)
        svg << "<line x1=\"" << sx(ev.t) << "\" y1=\"" << top << "\" x2=\"" << sx(ev.t)
            << "\" y2=\"" << bottom << "\" stroke=\"#bbb\" stroke-dasharray=\"4,3\"/>\n"
            << "<text x=\"" << sx(ev.t) + 3 << "\" y=\"" << top + 12
            << "\" font-size=\"10\" fill=\"#666\">" << action_name(ev.label) << "</text>\n";

    for (int j = 0; j < act::kNumJoints; ++j) {
        svg << "<polyline fill=\"none\" stroke=\"" << kJointColors[static_cast<std::size_t>(j)]
            << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& ev : samples)
            svg << sx(ev.t) << "," << sy(ev.joints[static_cast<std::size_t>(j)]) << " ";
        svg << "\"/>\n"
            << "<text x=\"" << left + 10 + 90 * j << "\" y=\"" << top - 10
            << "\" font-size=\"12\" fill=\"" << kJointColors[static_cast<std::size_t>(j)] << "\">"
            << kJointNames[static_cast<std::size_t>(j)] << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace

ReplayResult cmd_replay(const std::string& event_log_path, const std::string& out_dir) {
    ensure_dir(out_dir);
    std::ifstream in(event_log_path);
    if (!in) throw IoError("cannot open event log: " + event_log_path);

    std::vector<act::ActuatorEvent> samples, transitions;
    ReplayResult result;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        const auto ev = act::parse_event(line);
        if (!ev)
            throw IoError(event_log_path + ": line " + std::to_string(lineno) +
                          ": bad event line");
        ++result.events;
        switch (ev->kind) {
            case act::EventKind::TickSample:
                ++result.kind_counts["tick_sample"];
                samples.push_back(*ev);
                break;
            case act::EventKind::Transition:
                ++result.kind_counts["transition"];
                transitions.push_back(*ev);
                break;
            case act::EventKind::Accept: ++result.kind_counts["accept"]; break;
            case act::EventKind::Reject: ++result.kind_counts["reject"]; break;
        }
    }

    std::string csv = "t,label,progress,shoulder,elbow,wrist,grip\n";
    for (const auto& ev : samples) {
        char row[160];
        std::snprintf(row, sizeof row, "%.3f,%s,%.4f,%.2f,%.2f,%.2f,%.2f\n", ev.t,
                      action_name(ev.label), ev.progress, ev.joints[0], ev.joints[1],
                      ev.joints[2], ev.joints[3]);
        csv += row;
    }
    result.csv_path = join(out_dir, "trajectory.csv");
    result.svg_path = join(out_dir, "trajectory.svg");
    write_text(result.csv_path, csv);
    write_text(result.svg_path, trajectory_svg(samples, transitions));

    write_manifest(out_dir, "replay", {{"event_log", event_log_path}},
                   {{"trajectory_csv", result.csv_path}, {"trajectory_svg", result.svg_path}});
    return result;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const HarnessConfig& cfg,
                    const std::map<std::string, std::string>& inputs,
                    const std::map<std::string, std::string>& artifacts) {
    json manifest;
    manifest["command"] = command;
    manifest["seed"] = cfg.seed;
    manifest["config"] = json::parse(config_to_json(cfg));
    manifest["inputs"] = inputs;
    manifest["artifacts"] = artifacts;
    write_manifest_json(out_dir, std::move(manifest));
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::map<std::string, std::string>& inputs,
                    const std::map<std::string, std::string>& artifacts) {
    json manifest;
    manifest["command"] = command;
    manifest["inputs"] = inputs;
    manifest["artifacts"] = artifacts;
    write_manifest_json(out_dir, std::move(manifest));
}

}  // namespace neuroarm::app
