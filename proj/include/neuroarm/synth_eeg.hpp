#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <random>

#include "neuroarm/types.hpp"

namespace neuroarm::synth {

/// Per-band sinusoid amplitudes in µV, one per channel.
/// amplitude[band][channel], bands ordered delta..gamma.
struct BandProfile {
    std::array<std::array<double, kNumChannels>, kNumBands> amplitude{};
};

/// Environmental interference model: mains hum plus white sensor noise.
struct NoiseSpec {
    double mains_freq = 50.0;  // Hz, 50 or 60
    double mains_amp = 0.0;    // µV
    double white_sigma = 0.0;  // µV, Gaussian per sample per channel
};

/// A block of consecutive raw samples, one column per channel.
struct RawChunk {
    Eigen::MatrixXd samples;  // n × 4, µV
    std::uint64_t start_index = 0;
    double rate = 200.0;  // Hz
    BrainState truth = BrainState::Idle;
};

/// Sinusoid synthesis frequencies, one per band: the midpoints of the
/// analysis bands, with gamma held below Nyquist at a 200 Hz rate.
inline constexpr std::array<double, kNumBands> kBandToneHz = {2.5, 6.0, 10.0, 20.0, 40.0};

/// Default per-state profiles: elevated alpha when relaxed, elevated
/// beta/gamma when concentrated, flat low-amplitude broadband when idle.
std::map<BrainState, BandProfile> default_profiles();

/// Deterministic stand-in for a 4-channel EEG headset. Each channel is a
/// sum of per-band sinusoids (amplitudes from the active state's profile,
/// phases fixed per (seed, band, channel)), a common-mode mains tone, and
/// seeded Gaussian white noise.
///
/// Single-owner; chunks it returns are immutable values. Identical
/// (profiles, noise, seed, state script) reproduce the stream byte for
/// byte. PRNG: std::mt19937_64.
class SignalGenerator {
  public:
    SignalGenerator(const std::map<BrainState, BandProfile>& profiles, const NoiseSpec& noise,
                    std::uint64_t seed, double rate = 200.0);

    /// Generates the next n samples. Sample indices and sinusoid phases are
    /// continuous across calls and across state switches.
    RawChunk next_chunk(int n);

    /// Switches the active profile starting at the next sample boundary.
    void set_state(BrainState state) { state_ = state; }

    BrainState state() const { return state_; }
    double rate() const { return rate_; }
    std::uint64_t cursor() const { return cursor_; }

  private:
    std::array<BandProfile, 3> profiles_;  // indexed by BrainState
    NoiseSpec noise_;
    double rate_;
    std::array<std::array<double, kNumChannels>, kNumBands> phase_{};
    std::mt19937_64 rng_;
    std::normal_distribution<double> gauss_{0.0, 1.0};
    std::uint64_t cursor_ = 0;
    BrainState state_ = BrainState::Idle;
};

/// Debug export, columns: index,ch1..ch4,truth.
void append_raw_csv(std::ostream& out, const RawChunk& chunk);

}  // namespace neuroarm::synth
