#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "neuroarm/synth_eeg.hpp"
#include "neuroarm/types.hpp"

namespace neuroarm::dsp {

enum class BandId : int { Delta = 0, Theta, Alpha, Beta, Gamma };

/// Half-open frequency range [lo, hi) in Hz.
struct Band {
    BandId tag;
    double lo;
    double hi;
};

/// The five analysis bands: delta [1,4), theta [4,8), alpha [8,13),
/// beta [13,30), gamma [30, nyquist). Requires nyquist >= 30; at exactly
/// 30 the gamma band is empty and always reports zero power.
std::array<Band, kNumBands> standard_bands(double nyquist);

/// Alpha sub-bands [8,10) and [11,13); diagnostic output only, folded into
/// the single alpha feature everywhere else.
Band alpha1_band();
Band alpha2_band();

enum class Taper { Rectangular, Hann };

/// One-sided magnitude spectrum per channel.
struct Spectrum {
    std::vector<double> bin_freqs;                              // window_len/2 + 1
    std::array<std::vector<double>, kNumChannels> magnitudes;   // |X_k| per channel
    int window_len = 0;
    double rate = 0.0;
};

/// Magnitude spectrum of an n × 4 window. n must be a power of two, >= 64.
Spectrum spectrum(const Eigen::MatrixXd& window, double rate, Taper taper = Taper::Rectangular);

/// Sum of squared magnitudes over bins with band.lo <= f < band.hi, per channel.
std::array<double, kNumChannels> band_power(const Spectrum& spec, const Band& band);

std::pair<std::array<double, kNumChannels>, std::array<double, kNumChannels>> alpha_subbands(
    const Spectrum& spec);

/// Direct-form-II-transposed biquad section.
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;  // a0 normalized to 1
    double z1 = 0, z2 = 0;

    double step(double x) {
        const double y = b0 * x + z1;
        z1 = b1 * x - a1 * y + z2;
        z2 = b2 * x - a2 * y;
        return y;
    }
    void reset() { z1 = z2 = 0; }
    /// |H(e^{j 2π f / rate})|
    double magnitude_at(double freq_hz, double rate) const;

    static Biquad notch(double f0, double rate, double q);
    static Biquad highpass(double fc, double rate);  // 2nd-order Butterworth
};

/// Mains-interference removal: a narrow IIR notch at the mains frequency
/// (1 Hz wide at -3 dB) cascaded with a 0.5 Hz high-pass that strips drift.
/// Carries filter state across chunks so a live stream sees one continuous
/// filter rather than a transient per chunk.
class StreamingCleaner {
  public:
    StreamingCleaner(double rate, double mains_freq);

    synth::RawChunk process(const synth::RawChunk& chunk);
    void reset();

    /// Steady-state cascade gain at freq_hz.
    double magnitude_at(double freq_hz) const;

  private:
    double rate_;
    std::array<Biquad, kNumChannels> notch_;
    std::array<Biquad, kNumChannels> highpass_;
};

/// Stateless per-chunk form: filters the chunk from zero initial state.
synth::RawChunk clean_artifacts(const synth::RawChunk& chunk, double mains_freq);

/// The 20-dimensional band-power feature frame. Values are channel-major:
/// Fp1[delta..gamma], Fp2[...], T3[...], T4[...]; each channel's five
/// values are normalized to sum to 1.
struct FeatureVector {
    std::uint64_t index = 0;
    std::array<double, kFeatureDim> values{};
    std::optional<BrainState> truth;
};

/// Sliding-window band-power extraction over a cleaned sample stream.
/// Emits one FeatureVector per `hop` input samples once `win_len` samples
/// have accumulated; frame truth is the truth of the window's last sample.
class FeatureExtractor {
  public:
    FeatureExtractor(int win_len, int hop, double rate, Taper taper = Taper::Hann);

    std::vector<FeatureVector> push(const synth::RawChunk& chunk);

    int win_len() const { return win_len_; }
    int hop() const { return hop_; }
    /// Input sample index at which the window of frame `index` starts.
    std::uint64_t window_start(std::uint64_t frame_index) const {
        return frame_index * static_cast<std::uint64_t>(hop_);
    }

  private:
    int win_len_;
    int hop_;
    double rate_;
    Taper taper_;
    Eigen::MatrixXd buffer_;            // ring of pending samples, row-compacted
    std::vector<BrainState> truths_;    // per buffered sample
    std::uint64_t next_frame_ = 0;
    std::uint64_t consumed_ = 0;        // samples dropped from the buffer front
};

/// Whole-stream convenience around FeatureExtractor.
std::vector<FeatureVector> extract_features(const std::vector<synth::RawChunk>& chunks,
                                            int win_len, int hop, double rate,
                                            Taper taper = Taper::Hann);

/// Computes a feature vector from one standalone window (no hop state).
FeatureVector features_of_window(const Eigen::MatrixXd& window, double rate, Taper taper,
                                 std::uint64_t index = 0);

/// (relaxation, concentration): mean over channels of alpha/(alpha+beta)
/// and its complement. Channels with alpha+beta == 0 abstain; if all
/// abstain both metrics are the declared neutral 0.5.
std::pair<double, double> focus_metrics(const FeatureVector& fv);

/// Feature CSV row: index,f1..f20[,label]; the format consumed by the
/// dataset builder.
void append_feature_csv(std::ostream& out, const FeatureVector& fv, bool with_truth);

}  // namespace neuroarm::dsp
