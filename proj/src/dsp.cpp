#include "neuroarm/dsp.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace neuroarm::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 Cooley-Tukey, decimation in time.
void fft_radix2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

std::vector<double> taper_coeffs(int n, Taper taper) {
    std::vector<double> w(static_cast<std::size_t>(n), 1.0);
    if (taper == Taper::Hann) {
        for (int i = 0; i < n; ++i)
            w[static_cast<std::size_t>(i)] =
                0.5 * (1.0 - std::cos(2.0 * kPi * i / static_cast<double>(n)));
    }
    return w;
}

}  // namespace

std::array<Band, kNumBands> standard_bands(double nyquist) {
    if (!(nyquist >= 30.0)) throw ConfigError("nyquist must be at least 30 Hz");
    return {Band{BandId::Delta, 1.0, 4.0}, Band{BandId::Theta, 4.0, 8.0},
            Band{BandId::Alpha, 8.0, 13.0}, Band{BandId::Beta, 13.0, 30.0},
            Band{BandId::Gamma, 30.0, nyquist}};
}

Band alpha1_band() { return {BandId::Alpha, 8.0, 10.0}; }
Band alpha2_band() { return {BandId::Alpha, 11.0, 13.0}; }

Spectrum spectrum(const Eigen::MatrixXd& window, double rate, Taper taper) {
    const int n = static_cast<int>(window.rows());
    if (window.cols() != kNumChannels)
        throw ConfigError("spectrum expects a window with 4 channels");
    if (n < 64 || !is_power_of_two(n))
        throw ConfigError("window length must be a power of two >= 64");
    if (!window.allFinite()) throw ConfigError("window contains non-finite samples");

    Spectrum spec;
    spec.window_len = n;
    spec.rate = rate;
    const int half = n / 2;
    spec.bin_freqs.resize(static_cast<std::size_t>(half) + 1);
    for (int k = 0; k <= half; ++k)
        spec.bin_freqs[static_cast<std::size_t>(k)] = rate * k / static_cast<double>(n);

    const std::vector<double> w = taper_coeffs(n, taper);
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(n));
    for (int c = 0; c < kNumChannels; ++c) {
        for (int i = 0; i < n; ++i)
            buf[static_cast<std::size_t>(i)] = window(i, c) * w[static_cast<std::size_t>(i)];
        fft_radix2(buf);
        auto& mags = spec.magnitudes[static_cast<std::size_t>(c)];
        mags.resize(static_cast<std::size_t>(half) + 1);
        for (int k = 0; k <= half; ++k) mags[static_cast<std::size_t>(k)] = std::abs(buf[static_cast<std::size_t>(k)]);
    }
    return spec;
}

std::array<double, kNumChannels> band_power(const Spectrum& spec, const Band& band) {
    // An empty intersection with [0, nyquist) is legal and yields zero power.
    const double nyquist = spec.rate / 2.0;
    std::array<double, kNumChannels> power{};
    for (std::size_t k = 0; k < spec.bin_freqs.size(); ++k) {
        const double f = spec.bin_freqs[k];
        if (f < band.lo || f >= band.hi || f >= nyquist) continue;
        for (int c = 0; c < kNumChannels; ++c) {
            const double m = spec.magnitudes[static_cast<std::size_t>(c)][k];
            power[static_cast<std::size_t>(c)] += m * m;
        }
    }
    return power;
}

std::pair<std::array<double, kNumChannels>, std::array<double, kNumChannels>> alpha_subbands(
    const Spectrum& spec) {
    return {band_power(spec, alpha1_band()), band_power(spec, alpha2_band())};
}

double Biquad::magnitude_at(double freq_hz, double rate) const {
    const double w = 2.0 * kPi * freq_hz / rate;
    const std::complex<double> z1c = std::polar(1.0, -w);
    const std::complex<double> z2c = z1c * z1c;
    const std::complex<double> num = b0 + b1 * z1c + b2 * z2c;
    const std::complex<double> den = 1.0 + a1 * z1c + a2 * z2c;
    return std::abs(num / den);
}

Biquad Biquad::notch(double f0, double rate, double q) {
    const double w0 = 2.0 * kPi * f0 / rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    Biquad bi;
    bi.b0 = 1.0 / a0;
    bi.b1 = -2.0 * c / a0;
    bi.b2 = 1.0 / a0;
    bi.a1 = -2.0 * c / a0;
    bi.a2 = (1.0 - alpha) / a0;
    return bi;
}

Biquad Biquad::highpass(double fc, double rate) {
    const double w0 = 2.0 * kPi * fc / rate;
    const double q = 1.0 / std::sqrt(2.0);
    const double alpha = std::sin(w0) / (2.0 * q);
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    Biquad bi;
    bi.b0 = (1.0 + c) / 2.0 / a0;
    bi.b1 = -(1.0 + c) / a0;
    bi.b2 = (1.0 + c) / 2.0 / a0;
    bi.a1 = -2.0 * c / a0;
    bi.a2 = (1.0 - alpha) / a0;
    return bi;
}

StreamingCleaner::StreamingCleaner(double rate, double mains_freq) : rate_(rate) {
    if (!(rate > 2.0 * mains_freq))
        throw ConfigError("sample rate too low to notch the mains frequency");
    // Q = f0 gives a 1 Hz wide notch: < 1 dB ripple from 1 Hz outside the
    // notch while the zero on the unit circle kills the mains tone itself.
    const Biquad n = Biquad::notch(mains_freq, rate, mains_freq);
    const Biquad hp = Biquad::highpass(0.5, rate);
    notch_.fill(n);
    highpass_.fill(hp);
}

void StreamingCleaner::reset() {
    for (auto& b : notch_) b.reset();
    for (auto& b : highpass_) b.reset();
}

synth::RawChunk StreamingCleaner::process(const synth::RawChunk& chunk) {
    synth::RawChunk out = chunk;
    for (int c = 0; c < kNumChannels; ++c) {
        Biquad& n = notch_[static_cast<std::size_t>(c)];
        Biquad& hp = highpass_[static_cast<std::size_t>(c)];
        for (Eigen::Index i = 0; i < chunk.samples.rows(); ++i)
            out.samples(i, c) = hp.step(n.step(chunk.samples(i, c)));
    }
    return out;
}

double StreamingCleaner::magnitude_at(double freq_hz) const {
    return notch_[0].magnitude_at(freq_hz, rate_) * highpass_[0].magnitude_at(freq_hz, rate_);
}

synth::RawChunk clean_artifacts(const synth::RawChunk& chunk, double mains_freq) {
    StreamingCleaner cleaner(chunk.rate, mains_freq);
    return cleaner.process(chunk);
}

FeatureVector features_of_window(const Eigen::MatrixXd& window, double rate, Taper taper,
                                 std::uint64_t index) {
    const Spectrum spec = spectrum(window, rate, taper);
    const auto bands = standard_bands(rate / 2.0);
    std::array<std::array<double, kNumBands>, kNumChannels> raw{};
    for (int b = 0; b < kNumBands; ++b) {
        const auto p = band_power(spec, bands[static_cast<std::size_t>(b)]);
        for (int c = 0; c < kNumChannels; ++c)
            raw[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)] = p[static_cast<std::size_t>(c)];
    }
    FeatureVector fv;
    fv.index = index;
    for (int c = 0; c < kNumChannels; ++c) {
        double total = 0;
        for (int b = 0; b < kNumBands; ++b) total += raw[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)];
        for (int b = 0; b < kNumBands; ++b) {
            // A silent channel has no band structure; report the uniform
            // neutral split so the frame still sums to 1 per channel.
            const double v = total > 0.0 ? raw[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)] / total
                                         : 1.0 / kNumBands;
            fv.values[static_cast<std::size_t>(c * kNumBands + b)] = v;
        }
    }
    return fv;
}

FeatureExtractor::FeatureExtractor(int win_len, int hop, double rate, Taper taper)
    : win_len_(win_len), hop_(hop), rate_(rate), taper_(taper), buffer_(0, kNumChannels) {
    if (hop < 1) throw ConfigError("hop must be >= 1");
    if (win_len < 64 || !is_power_of_two(win_len))
        throw ConfigError("window length must be a power of two >= 64");
}

std::vector<FeatureVector> FeatureExtractor::push(const synth::RawChunk& chunk) {
    const Eigen::Index old_rows = buffer_.rows();
    buffer_.conservativeResize(old_rows + chunk.samples.rows(), Eigen::NoChange);
    buffer_.bottomRows(chunk.samples.rows()) = chunk.samples;
    truths_.insert(truths_.end(), static_cast<std::size_t>(chunk.samples.rows()), chunk.truth);

    std::vector<FeatureVector> out;
    // Next window covers absolute samples [next_frame_*hop, ... + win_len).
    while (true) {
        const std::uint64_t start_abs = next_frame_ * static_cast<std::uint64_t>(hop_);
        const std::uint64_t end_abs = start_abs + static_cast<std::uint64_t>(win_len_);
        if (end_abs > consumed_ + static_cast<std::uint64_t>(buffer_.rows())) break;
        const Eigen::Index start = static_cast<Eigen::Index>(start_abs - consumed_);
        FeatureVector fv = features_of_window(buffer_.middleRows(start, win_len_), rate_, taper_,
                                              next_frame_);
        fv.truth = truths_[static_cast<std::size_t>(start) + static_cast<std::size_t>(win_len_) - 1];
        out.push_back(fv);
        ++next_frame_;
    }
    // Drop samples no future window can reach.
    const std::uint64_t keep_from = next_frame_ * static_cast<std::uint64_t>(hop_);
    if (keep_from > consumed_) {
        const Eigen::Index drop = static_cast<Eigen::Index>(keep_from - consumed_);
        if (drop >= buffer_.rows()) {
            buffer_.resize(0, kNumChannels);
            truths_.clear();
        } else {
            const Eigen::Index remain = buffer_.rows() - drop;
            Eigen::MatrixXd tail = buffer_.bottomRows(remain);
            buffer_ = std::move(tail);
            truths_.erase(truths_.begin(), truths_.begin() + drop);
        }
        consumed_ = keep_from;
    }
    return out;
}

std::vector<FeatureVector> extract_features(const std::vector<synth::RawChunk>& chunks,
                                            int win_len, int hop, double rate, Taper taper) {
    FeatureExtractor ex(win_len, hop, rate, taper);
    std::vector<FeatureVector> out;
    for (const auto& chunk : chunks) {
        auto frames = ex.push(chunk);
        out.insert(out.end(), frames.begin(), frames.end());
    }
    return out;
}

std::pair<double, double> focus_metrics(const FeatureVector& fv) {
    double sum = 0;
    int voters = 0;
    for (int c = 0; c < kNumChannels; ++c) {
        const double alpha = fv.values[static_cast<std::size_t>(c * kNumBands + 2)];
        const double beta = fv.values[static_cast<std::size_t>(c * kNumBands + 3)];
        if (alpha + beta > 0.0) {
            sum += alpha / (alpha + beta);
            ++voters;
        }
    }
    if (voters == 0) return {0.5, 0.5};
    const double relaxation = sum / voters;
    return {relaxation, 1.0 - relaxation};
}

void append_feature_csv(std::ostream& out, const FeatureVector& fv, bool with_truth) {
    out << fv.index;
    for (double v : fv.values) out << ',' << format_sig9(v);
    if (with_truth && fv.truth) out << ',' << static_cast<int>(to_action(*fv.truth));
    out << '\n';
}

}  // namespace neuroarm::dsp
