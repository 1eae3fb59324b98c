#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "neuroarm/config.hpp"
#include "neuroarm/session.hpp"

namespace {

using namespace neuroarm;
using namespace neuroarm::app;

HarnessConfig load_or_default(const std::string& config_path,
                              const std::optional<std::uint64_t>& seed) {
    HarnessConfig cfg = config_path.empty() ? HarnessConfig{} : load_config(config_path);
    if (seed) cfg.seed = *seed;
    return cfg;
}

void print_success_triple(const char* heading, double idle, double handshake, double cup,
                          bool percent) {
    if (percent)
        std::printf("%s %.0f%% for idle/stationary, %.0f%% for handshake, and %.0f%% for cup pickup\n",
                    heading, idle * 100.0, handshake * 100.0, cup * 100.0);
    else
        std::printf("%s %.2f idle/stationary, %.2f handshake, %.2f cup pickup\n", heading, idle,
                    handshake, cup);
}

int run_app(int argc, char** argv) {
    CLI::App app{"Synthetic EEG-to-prosthetic pipeline: collect, train, eval, run, replay"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, model_path, log_path;
    std::optional<std::uint64_t> seed;
    bool with_ffnn = false;
    std::vector<int> sweep_sizes;

    auto* init = app.add_subcommand("init", "Write the default config file");
    init->add_option("--out", out_dir, "Config file to write")->default_val("neuroarm.json");

    auto* collect = app.add_subcommand("collect", "Stream a scripted session into labeled CSVs");
    collect->add_option("--config", config_path, "Config JSON (defaults when omitted)");
    collect->add_option("--seed", seed, "Seed override");
    collect->add_option("--out", out_dir, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Train the classifier on collected CSVs");
    train->add_option("--config", config_path, "Config JSON (defaults when omitted)");
    train->add_option("--seed", seed, "Seed override");
    train->add_option("--data", data_dir, "Directory with per-action CSVs")->required();
    train->add_option("--out", out_dir, "Output directory")->required();
    train->add_flag("--ffnn", with_ffnn, "Also train the flat baseline");
    train->add_option("--sweep", sweep_sizes, "Window sizes for an accuracy sweep");

    auto* eval = app.add_subcommand("eval", "Score a saved model on a data directory");
    eval->add_option("--model", model_path, "Serialized model file")->required();
    eval->add_option("--data", data_dir, "Directory with per-action CSVs")->required();
    eval->add_option("--out", out_dir, "Output directory")->required();

    auto* run = app.add_subcommand("run", "Closed-loop session: stream, classify, actuate");
    run->add_option("--config", config_path, "Config JSON (defaults when omitted)");
    run->add_option("--seed", seed, "Seed override");
    run->add_option("--model", model_path, "Serialized model file")->required();
    run->add_option("--out", out_dir, "Output directory")->required();

    auto* replay = app.add_subcommand("replay", "Render an actuator event log as CSV and SVG");
    replay->add_option("--log", log_path, "Event log file")->required();
    replay->add_option("--out", out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (init->parsed()) {
        save_config(out_dir, HarnessConfig{});
        std::printf("wrote %s\n", out_dir.c_str());
        return 0;
    }

    if (collect->parsed()) {
        const HarnessConfig cfg = load_or_default(config_path, seed);
        const CollectResult r = cmd_collect(cfg, out_dir);
        std::printf("collected feature rows (action: [rows, dims] -> file)\n");
        for (const auto& [label, path] : r.files)
            std::printf("  %14s  [%zu, %d]  -> %s\n", action_name(label), r.rows.at(label),
                        kFeatureDim, path.c_str());
        std::printf("dropped %zu boundary frames; received %llu datagrams, %llu gaps, "
                    "%llu reorders, %llu format errors\n",
                    r.dropped_boundary_frames,
                    static_cast<unsigned long long>(r.loss.received),
                    static_cast<unsigned long long>(r.loss.gaps),
                    static_cast<unsigned long long>(r.loss.reorders),
                    static_cast<unsigned long long>(r.loss.format_errors));
        return 0;
    }

    if (train->parsed()) {
        const HarnessConfig cfg = load_or_default(config_path, seed);
        const TrainResult r = cmd_train(cfg, data_dir, out_dir, with_ffnn, sweep_sizes);
        std::printf("model: %s\nhistory: %s\n", r.model_path.c_str(), r.history_path.c_str());
        std::printf("test accuracy: %.4f\n", r.test_accuracy);
        if (r.ffnn_test_accuracy)
            std::printf("ffnn baseline test accuracy: %.4f\n", *r.ffnn_test_accuracy);
        for (const auto& row : r.sweep)
            std::printf("sweep win_size %3d: test accuracy %.4f\n", row.win_size,
                        row.test_accuracy);
        return 0;
    }

    if (eval->parsed()) {
        const EvalResult r = cmd_eval(model_path, data_dir, out_dir);
        std::fputs(r.report.to_text().c_str(), stdout);
        std::printf("report: %s, %s\n", r.text_path.c_str(), r.json_path.c_str());
        return 0;
    }

    if (run->parsed()) {
        const HarnessConfig cfg = load_or_default(config_path, seed);
        const RunResult r = cmd_run(cfg, model_path, out_dir);
        const auto rate = [&](ActionLabel a) {
            const auto it = r.per_action.find(a);
            return it == r.per_action.end() ? 0.0 : it->second.rate();
        };
        print_success_triple("online success:", rate(ActionLabel::StayIdle),
                             rate(ActionLabel::ShakeHands), rate(ActionLabel::PickUpCup), true);
        std::printf("published human-EEG reference values, for context only (this synthetic "
                    "harness does not reproduce them):\n");
        print_success_triple("  headline:", 0.91, 0.85, 0.84, true);
        print_success_triple("  per-class recall:", 0.92, 0.86, 0.82, false);
        print_success_triple("  long-run:", 0.90, 0.80, 0.80, true);
        std::printf("%llu emissions; event log %s\nreport: %s\n",
                    static_cast<unsigned long long>(r.emissions), r.event_log_path.c_str(),
                    r.report_path.c_str());
        for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        return 0;
    }

    const ReplayResult r = cmd_replay(log_path, out_dir);
    std::printf("%zu events", r.events);
    for (const auto& [kind, count] : r.kind_counts) std::printf(", %zu %s", count, kind.c_str());
    std::printf("\ntrajectory: %s\nplot: %s\n", r.csv_path.c_str(), r.svg_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_app(argc, argv);
    } catch (const neuroarm::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const neuroarm::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const neuroarm::TransportError& e) {
        std::fprintf(stderr, "transport error: %s\n", e.what());
        return 4;
    } catch (const neuroarm::TrainingError& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
