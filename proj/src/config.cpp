#include "neuroarm/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace neuroarm::app {

namespace {

using nlohmann::json;

constexpr std::array<BrainState, 3> kStates{BrainState::RelaxedHandshake,
                                            BrainState::ConcentratedCup, BrainState::Idle};

void expect_keys(const json& j, const std::string& where,
                 std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return it.key() == k; });
        if (!known) throw ConfigError("unknown config key: " + where + "." + it.key());
    }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json profile_to_json(const synth::BandProfile& p) {
    json bands = json::array();
    for (int b = 0; b < kNumBands; ++b) {
        json row = json::array();
        for (int c = 0; c < kNumChannels; ++c)
            row.push_back(p.amplitude[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)]);
        bands.push_back(row);
    }
    return bands;
}

synth::BandProfile profile_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != kNumBands)
        throw ConfigError(where + " must be a " + std::to_string(kNumBands) + "x" +
                          std::to_string(kNumChannels) + " amplitude array");
    synth::BandProfile p;
    for (int b = 0; b < kNumBands; ++b) {
        const json& row = j[static_cast<std::size_t>(b)];
        if (!row.is_array() || row.size() != kNumChannels)
            throw ConfigError(where + " band " + std::to_string(b) + " must have " +
                              std::to_string(kNumChannels) + " channel amplitudes");
        for (int c = 0; c < kNumChannels; ++c)
            p.amplitude[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)] =
                row[static_cast<std::size_t>(c)].get<double>();
    }
    return p;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

void HarnessConfig::validate() const {
    if (!(sample_rate_hz >= 60.0))
        throw ConfigError("sample_rate_hz must be >= 60 so every analysis band exists");
    if (noise.mains_freq != 50.0 && noise.mains_freq != 60.0)
        throw ConfigError("mains_freq must be 50 or 60");
    if (noise.mains_amp < 0.0 || noise.white_sigma < 0.0)
        throw ConfigError("noise amplitudes must be non-negative");
    for (BrainState s : kStates)
        if (!profiles.count(s))
            throw ConfigError(std::string("profiles missing state ") + state_name(s));

    if (!is_power_of_two(fft_window) || fft_window < 64)
        throw ConfigError("fft_window must be a power of two, >= 64");
    if (hop < 1 || hop > fft_window) throw ConfigError("hop must be in [1, fft_window]");

    if (udp_host.empty()) throw ConfigError("udp_host must not be empty");
    if (serial_latency_s < 0.0) throw ConfigError("serial_latency_s must be >= 0");

    if (win_size < 4) throw ConfigError("win_size must be >= 4");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("test_fraction must be inside (0, 1)");

    model.validate();
    if (train.epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (!(train.lr > 0.0)) throw ConfigError("train.lr must be positive");
    if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(metric_threshold >= 0.0 && metric_threshold <= 1.0))
        throw ConfigError("metric_threshold must be inside [0, 1]");

    if (!(collect_seconds_per_action > 0.0))
        throw ConfigError("collect_seconds_per_action must be positive");
    if (collect_seconds_per_action * sample_rate_hz < fft_window)
        throw ConfigError("collect_seconds_per_action too short for one fft_window");
    if (!(run_block_seconds > 0.0)) throw ConfigError("run_block_seconds must be positive");
    if (!(run_seconds >= run_block_seconds))
        throw ConfigError("run_seconds must cover at least one block");
    if (!(emit_period_s > 0.0)) throw ConfigError("emit_period_s must be positive");
    if (!(action_duration_s > 0.0)) throw ConfigError("action_duration_s must be positive");
    if (time_scale < 0.0) throw ConfigError("time_scale must be >= 0 (0 = unpaced)");
}

std::string config_to_json(const HarnessConfig& cfg) {
    json j;
    j["signal"] = {{"sample_rate_hz", cfg.sample_rate_hz},
                   {"mains_freq", cfg.noise.mains_freq},
                   {"mains_amp", cfg.noise.mains_amp},
                   {"white_sigma", cfg.noise.white_sigma}};
    json profiles;
    for (const auto& [state, profile] : cfg.profiles)
        profiles[state_name(state)] = profile_to_json(profile);
    j["profiles"] = profiles;
    j["features"] = {{"fft_window", cfg.fft_window}, {"hop", cfg.hop}};
    j["transport"] = {{"udp_host", cfg.udp_host},
                      {"udp_port", cfg.udp_port},
                      {"serial_latency_s", cfg.serial_latency_s}};
    j["dataset"] = {{"win_size", cfg.win_size}, {"test_fraction", cfg.test_fraction}};
    j["model"] = {{"model_dim", cfg.model.model_dim},
                  {"heads", cfg.model.heads},
                  {"ff_dim", cfg.model.ff_dim}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"lr", cfg.train.lr},
                  {"batch_size", cfg.train.batch_size}};
    j["threshold"] = {{"metric_threshold", cfg.metric_threshold}};
    j["session"] = {{"collect_seconds_per_action", cfg.collect_seconds_per_action},
                    {"run_seconds", cfg.run_seconds},
                    {"run_block_seconds", cfg.run_block_seconds},
                    {"emit_period_s", cfg.emit_period_s},
                    {"action_duration_s", cfg.action_duration_s},
                    {"time_scale", cfg.time_scale}};
    j["seed"] = cfg.seed;
    return j.dump(2);
}

HarnessConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    HarnessConfig cfg;
    try {
        expect_keys(j, "config",
                    {"signal", "profiles", "features", "transport", "dataset", "model", "train",
                     "threshold", "session", "seed"});
        if (j.contains("signal")) {
            const json& s = j.at("signal");
            expect_keys(s, "signal", {"sample_rate_hz", "mains_freq", "mains_amp", "white_sigma"});
            read_if(s, "sample_rate_hz", cfg.sample_rate_hz);
            read_if(s, "mains_freq", cfg.noise.mains_freq);
            read_if(s, "mains_amp", cfg.noise.mains_amp);
            read_if(s, "white_sigma", cfg.noise.white_sigma);
        }
        if (j.contains("profiles")) {
            const json& p = j.at("profiles");
            expect_keys(p, "profiles",
                        {state_name(BrainState::RelaxedHandshake),
                         state_name(BrainState::ConcentratedCup), state_name(BrainState::Idle)});
            for (BrainState s : kStates)
                if (p.contains(state_name(s)))
                    cfg.profiles[s] = profile_from_json(p.at(state_name(s)),
                                                        std::string("profiles.") + state_name(s));
        }
        if (j.contains("features")) {
            const json& f = j.at("features");
            expect_keys(f, "features", {"fft_window", "hop"});
            read_if(f, "fft_window", cfg.fft_window);
            read_if(f, "hop", cfg.hop);
        }
        if (j.contains("transport")) {
            const json& t = j.at("transport");
            expect_keys(t, "transport", {"udp_host", "udp_port", "serial_latency_s"});
            read_if(t, "udp_host", cfg.udp_host);
            read_if(t, "udp_port", cfg.udp_port);
            read_if(t, "serial_latency_s", cfg.serial_latency_s);
        }
        if (j.contains("dataset")) {
            const json& d = j.at("dataset");
            expect_keys(d, "dataset", {"win_size", "test_fraction"});
            read_if(d, "win_size", cfg.win_size);
            read_if(d, "test_fraction", cfg.test_fraction);
        }
        if (j.contains("model")) {
            const json& m = j.at("model");
            expect_keys(m, "model", {"model_dim", "heads", "ff_dim"});
            read_if(m, "model_dim", cfg.model.model_dim);
            read_if(m, "heads", cfg.model.heads);
            read_if(m, "ff_dim", cfg.model.ff_dim);
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            expect_keys(t, "train", {"epochs", "lr", "batch_size"});
            read_if(t, "epochs", cfg.train.epochs);
            read_if(t, "lr", cfg.train.lr);
            read_if(t, "batch_size", cfg.train.batch_size);
        }
        if (j.contains("threshold")) {
            const json& t = j.at("threshold");
            expect_keys(t, "threshold", {"metric_threshold"});
            read_if(t, "metric_threshold", cfg.metric_threshold);
        }
        if (j.contains("session")) {
            const json& s = j.at("session");
            expect_keys(s, "session",
                        {"collect_seconds_per_action", "run_seconds", "run_block_seconds",
                         "emit_period_s", "action_duration_s", "time_scale"});
            read_if(s, "collect_seconds_per_action", cfg.collect_seconds_per_action);
            read_if(s, "run_seconds", cfg.run_seconds);
            read_if(s, "run_block_seconds", cfg.run_block_seconds);
            read_if(s, "emit_period_s", cfg.emit_period_s);
            read_if(s, "action_duration_s", cfg.action_duration_s);
            read_if(s, "time_scale", cfg.time_scale);
        }
        read_if(j, "seed", cfg.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field has the wrong type: ") + e.what());
    }

    cfg.validate();
    return cfg;
}

HarnessConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return config_from_json(text.str());
}

void save_config(const std::string& path, const HarnessConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for write: " + path);
    out << config_to_json(cfg) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace neuroarm::app
