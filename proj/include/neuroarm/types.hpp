#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace neuroarm {

inline constexpr int kNumChannels = 4;
inline constexpr int kNumBands = 5;
inline constexpr int kFeatureDim = kNumChannels * kNumBands;  // 20

/// Electrode labels, in channel order 0..3.
inline constexpr std::array<const char*, kNumChannels> kChannelNames = {"Fp1", "Fp2", "T3", "T4"};

/// The three prosthetic actions. Numeric values are the canonical on-wire
/// and dataset labels.
enum class ActionLabel : int {
    PickUpCup = 0,
    ShakeHands = 1,
    StayIdle = 2,
};

/// Ground-truth mental state of the synthetic signal source.
enum class BrainState : int {
    RelaxedHandshake = 0,
    ConcentratedCup = 1,
    Idle = 2,
};

inline constexpr int kNumActions = 3;

constexpr ActionLabel to_action(BrainState s) {
    switch (s) {
        case BrainState::RelaxedHandshake: return ActionLabel::ShakeHands;
        case BrainState::ConcentratedCup: return ActionLabel::PickUpCup;
        case BrainState::Idle: return ActionLabel::StayIdle;
    }
    return ActionLabel::StayIdle;
}

constexpr BrainState to_state(ActionLabel a) {
    switch (a) {
        case ActionLabel::ShakeHands: return BrainState::RelaxedHandshake;
        case ActionLabel::PickUpCup: return BrainState::ConcentratedCup;
        case ActionLabel::StayIdle: return BrainState::Idle;
    }
    return BrainState::Idle;
}

const char* action_name(ActionLabel a);
const char* state_name(BrainState s);

// Error taxonomy. Each maps to a distinct CLI exit code.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// splitmix64 mixing step; used to derive independent sub-seeds from one
/// master seed so that parallel components never share PRNG streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(seed ^ splitmix64(salt));
}

/// Formats a double with 9 significant digits ("%.8e"). This is the one
/// numeric text format used on the wire and in CSV files.
std::string format_sig9(double v);

}  // namespace neuroarm
