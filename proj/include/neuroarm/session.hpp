#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neuroarm/actuator.hpp"
#include "neuroarm/config.hpp"
#include "neuroarm/model.hpp"
#include "neuroarm/transport.hpp"

namespace neuroarm::app {

inline constexpr const char* kHarnessVersion = "1.0.0";

/// Scripted ground-truth timeline: which mental state the signal source
/// holds, for how long. Sample-index boundaries are exact.
struct StateScript {
    struct Block {
        BrainState state = BrainState::Idle;
        double seconds = 0.0;
    };
    std::vector<Block> blocks;

    double total_seconds() const;
    /// State at time t; the final block extends beyond the end.
    BrainState state_at(double t_s) const;
};

/// One block per action, collect_seconds_per_action each, in label order.
StateScript collect_script(const HarnessConfig& cfg);

/// Idle / relaxed / concentrated blocks of run_block_seconds cycling until
/// run_seconds is covered (the last block may be shorter).
StateScript run_script(const HarnessConfig& cfg);

/// Synthesizes the scripted session and runs it through the full front
/// end: generator, artifact cleaner, feature extractor. Deterministic.
std::vector<dsp::FeatureVector> synthesize_features(const HarnessConfig& cfg,
                                                    const StateScript& script,
                                                    std::uint64_t seed);

struct CollectResult {
    std::map<ActionLabel, std::string> files;
    std::map<ActionLabel, std::size_t> rows;
    std::size_t dropped_boundary_frames = 0;
    net::LossStats loss;
};

/// Data collection phase: scripted EEG is streamed over UDP loopback,
/// decoded, labeled by the script, and appended to one CSV per action.
/// Feature windows that straddle a script boundary are dropped.
CollectResult cmd_collect(const HarnessConfig& cfg, const std::string& out_dir);

struct TrainResult {
    std::string model_path;
    std::string history_path;
    model::TrainHistory history;
    double test_accuracy = 0.0;
    std::optional<double> ffnn_test_accuracy;
    std::vector<model::WindowSizeResult> sweep;
};

/// Training phase: build a stratified split from the collected CSVs,
/// train the attention classifier, and serialize model plus history.
/// Optionally trains the flat baseline and runs a window-size sweep.
TrainResult cmd_train(const HarnessConfig& cfg, const std::string& data_dir,
                      const std::string& out_dir, bool with_ffnn = false,
                      const std::vector<int>& sweep_sizes = {});

struct EvalResult {
    std::string text_path;
    std::string json_path;
    model::EvalReport report;
};

/// Scores a saved model on every disjoint window of the data directory,
/// using the standardizer embedded in the model file.
EvalResult cmd_eval(const std::string& model_path, const std::string& data_dir,
                    const std::string& out_dir);

struct ActionScore {
    int attempts = 0;
    int successes = 0;
    double rate() const { return attempts ? double(successes) / attempts : 0.0; }
};

struct RunResult {
    std::string event_log_path;
    std::string report_path;
    std::map<ActionLabel, ActionScore> per_action;
    std::uint64_t emissions = 0;
    net::LossStats loss;
    std::vector<std::string> warnings;
};

/// Deployment phase: producer, classifier, and actuator run as three
/// tasks linked only by UDP loopback and the serial channel. Session time
/// is compressed by cfg.time_scale; an emission counts as a success when
/// its label matches the scripted state at emission time.
RunResult cmd_run(const HarnessConfig& cfg, const std::string& model_path,
                  const std::string& out_dir);

struct ReplayResult {
    std::string csv_path;
    std::string svg_path;
    std::size_t events = 0;
    std::map<std::string, std::size_t> kind_counts;
};

/// Renders a saved actuator event log as a joint-trajectory CSV and a
/// self-contained SVG plot with transition markers.
ReplayResult cmd_replay(const std::string& event_log_path, const std::string& out_dir);

/// Writes out_dir/manifest.json describing one command invocation: the
/// full config, seed, inputs, artifacts, and harness version.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const HarnessConfig& cfg,
                    const std::map<std::string, std::string>& inputs,
                    const std::map<std::string, std::string>& artifacts);

/// Config-free variant for commands that only consume artifacts.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::map<std::string, std::string>& inputs,
                    const std::map<std::string, std::string>& artifacts);

}  // namespace neuroarm::app
