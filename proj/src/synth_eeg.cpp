#include "neuroarm/synth_eeg.hpp"

#include <cmath>
#include <numbers>

namespace neuroarm::synth {

namespace {

BandProfile uniform_profile(std::array<double, kNumBands> per_band) {
    BandProfile p;
    for (int b = 0; b < kNumBands; ++b) p.amplitude[b].fill(per_band[b]);
    return p;
}

}  // namespace

std::map<BrainState, BandProfile> default_profiles() {
    std::map<BrainState, BandProfile> m;
    // delta, theta, alpha, beta, gamma (µV)
    m[BrainState::Idle] = uniform_profile({3.0, 3.0, 4.0, 4.0, 2.0});

    BandProfile relaxed = uniform_profile({2.0, 3.0, 14.0, 3.0, 1.5});
    relaxed.amplitude[2][0] = 18.0;  // frontal electrodes pick up alpha best
    relaxed.amplitude[2][1] = 18.0;
    m[BrainState::RelaxedHandshake] = relaxed;

    BandProfile focused = uniform_profile({2.0, 2.0, 3.0, 10.0, 6.0});
    focused.amplitude[3][0] = 12.0;
    focused.amplitude[3][1] = 12.0;
    focused.amplitude[4][0] = 8.0;
    focused.amplitude[4][1] = 8.0;
    m[BrainState::ConcentratedCup] = focused;
    return m;
}

SignalGenerator::SignalGenerator(const std::map<BrainState, BandProfile>& profiles,
                                 const NoiseSpec& noise, std::uint64_t seed, double rate)
    : noise_(noise), rate_(rate), rng_(seed) {
    if (rate <= 0) throw ConfigError("sample rate must be positive");
    if (noise.mains_freq != 50.0 && noise.mains_freq != 60.0)
        throw ConfigError("mains_freq must be 50 or 60 Hz");
    if (noise.mains_amp < 0 || noise.white_sigma < 0)
        throw ConfigError("noise amplitudes must be non-negative");
    for (BrainState s :
         {BrainState::RelaxedHandshake, BrainState::ConcentratedCup, BrainState::Idle}) {
        auto it = profiles.find(s);
        if (it == profiles.end())
            throw ConfigError(std::string("missing band profile for state ") + state_name(s));
        for (const auto& band : it->second.amplitude)
            for (double a : band)
                if (!(a >= 0)) throw ConfigError("band amplitudes must be non-negative");
        profiles_[static_cast<int>(s)] = it->second;
    }
    // Phases are drawn once, band-major then channel, so the layout is part
    // of the pinned seed contract.
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * std::numbers::pi);
    for (int b = 0; b < kNumBands; ++b)
        for (int c = 0; c < kNumChannels; ++c) phase_[b][c] = uphase(rng_);
}

RawChunk SignalGenerator::next_chunk(int n) {
    if (n < 1) throw ConfigError("chunk size must be >= 1");
    RawChunk chunk;
    chunk.samples.setZero(n, kNumChannels);
    chunk.start_index = cursor_;
    chunk.rate = rate_;
    chunk.truth = state_;

    const BandProfile& prof = profiles_[static_cast<int>(state_)];
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(cursor_ + i) / rate_;
        const double mains = noise_.mains_amp * std::sin(two_pi * noise_.mains_freq * t);
        for (int c = 0; c < kNumChannels; ++c) {
            double v = mains;
            for (int b = 0; b < kNumBands; ++b) {
                const double a = prof.amplitude[b][c];
                if (a != 0.0) v += a * std::sin(two_pi * kBandToneHz[b] * t + phase_[b][c]);
            }
            // Noise is drawn sample-major/channel-minor regardless of chunk
            // boundaries, so the stream does not depend on chunking.
            v += noise_.white_sigma * gauss_(rng_);
            chunk.samples(i, c) = v;
        }
    }
    cursor_ += static_cast<std::uint64_t>(n);
    return chunk;
}

void append_raw_csv(std::ostream& out, const RawChunk& chunk) {
    for (Eigen::Index i = 0; i < chunk.samples.rows(); ++i) {
        out << (chunk.start_index + static_cast<std::uint64_t>(i));
        for (int c = 0; c < kNumChannels; ++c) out << ',' << format_sig9(chunk.samples(i, c));
        out << ',' << static_cast<int>(to_action(chunk.truth)) << '\n';
    }
}

}  // namespace neuroarm::synth
