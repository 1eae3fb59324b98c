#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "neuroarm/model.hpp"
#include "neuroarm/synth_eeg.hpp"
#include "neuroarm/types.hpp"

namespace neuroarm::app {

/// Every tunable of the pipeline in one place, so a run is fully described
/// by (config, seed). JSON on disk; absent keys keep these defaults,
/// unknown keys are rejected.
struct HarnessConfig {
    // signal source
    double sample_rate_hz = 200.0;
    synth::NoiseSpec noise{50.0, 2.0, 1.0};
    std::map<BrainState, synth::BandProfile> profiles = synth::default_profiles();

    // feature extraction
    int fft_window = 256;
    int hop = 5;

    // transport
    std::string udp_host = "127.0.0.1";
    std::uint16_t udp_port = 0;  // 0 asks the OS for an ephemeral port
    double serial_latency_s = 0.0;

    // dataset
    int win_size = 80;  // feature frames per classifier window (~2 s)
    double test_fraction = 0.2;

    // models
    model::TransformerConfig model;
    model::TrainOptions train;
    double metric_threshold = 0.8;

    // sessions
    double collect_seconds_per_action = 120.0;
    double run_seconds = 300.0;
    double run_block_seconds = 50.0;  // scripted state dwell during cmd_run
    double emit_period_s = 2.0;       // streaming label cadence
    double action_duration_s = 3.0;
    double time_scale = 100.0;        // session-time compression for cmd_run

    std::uint64_t seed = 42;

    void validate() const;  // ConfigError on any violation

    /// Feature frame rate implied by the hop.
    double frames_per_s() const { return sample_rate_hz / hop; }
};

std::string config_to_json(const HarnessConfig& cfg);
HarnessConfig config_from_json(const std::string& text);

/// Validated load; IoError when unreadable, ConfigError when invalid.
HarnessConfig load_config(const std::string& path);
void save_config(const std::string& path, const HarnessConfig& cfg);

}  // namespace neuroarm::app
