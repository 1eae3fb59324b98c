#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "neuroarm/dsp.hpp"
#include "neuroarm/synth_eeg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

using namespace neuroarm;
using namespace neuroarm::dsp;

namespace {

constexpr double kPi = std::numbers::pi;

/// Reference DFT, O(n^2). The oracle the fast transform must match.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const double ang = -2.0 * kPi * static_cast<double>(k) * static_cast<double>(i) /
                               static_cast<double>(n);
            acc += x[i] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

Eigen::MatrixXd random_window(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd w(n, kNumChannels);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < kNumChannels; ++c) w(i, c) = g(rng);
    return w;
}

Eigen::MatrixXd tone_window(int n, double rate, double freq, double amp) {
    Eigen::MatrixXd w(n, kNumChannels);
    for (int i = 0; i < n; ++i) {
        const double v = amp * std::sin(2.0 * kPi * freq * i / rate);
        for (int c = 0; c < kNumChannels; ++c) w(i, c) = v;
    }
    return w;
}

}  // namespace

TEST_CASE("spectrum matches a naive DFT") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const int n = 128;
        const Eigen::MatrixXd w = random_window(n, seed);
        const Spectrum spec = spectrum(w, 200.0, Taper::Rectangular);

        std::vector<double> ch0(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) ch0[static_cast<std::size_t>(i)] = w(i, 0);
        const auto ref = naive_dft(ch0);
        REQUIRE(spec.magnitudes[0].size() == static_cast<std::size_t>(n / 2 + 1));
        for (int k = 0; k <= n / 2; ++k) {
            CHECK(spec.magnitudes[0][static_cast<std::size_t>(k)] ==
                  doctest::Approx(std::abs(ref[static_cast<std::size_t>(k)])).epsilon(1e-10));
        }
    }
}

TEST_CASE("Parseval holds on random windows") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const int n = 256;
        const Eigen::MatrixXd w = random_window(n, 100 + seed);
        const Spectrum spec = spectrum(w, 200.0, Taper::Rectangular);
        for (int c = 0; c < kNumChannels; ++c) {
            double time_energy = 0;
            for (int i = 0; i < n; ++i) time_energy += w(i, c) * w(i, c);
            // One-sided sum: interior bins appear twice in the full DFT.
            double freq_energy = 0;
            const auto& m = spec.magnitudes[static_cast<std::size_t>(c)];
            for (int k = 0; k <= n / 2; ++k) {
                const double weight = (k == 0 || k == n / 2) ? 1.0 : 2.0;
                freq_energy += weight * m[static_cast<std::size_t>(k)] * m[static_cast<std::size_t>(k)];
            }
            freq_energy /= static_cast<double>(n);
            CHECK(std::abs(time_energy - freq_energy) / time_energy < 1e-9);
        }
    }
}

TEST_CASE("a bin-aligned tone lands in exactly one bin") {
    // 256 samples at 256 Hz: bin k sits at k Hz, so a 10 Hz tone is bin 10.
    const int n = 256;
    const Eigen::MatrixXd w = tone_window(n, 256.0, 10.0, 2.0);
    const Spectrum spec = spectrum(w, 256.0, Taper::Rectangular);
    for (int k = 0; k <= n / 2; ++k) {
        const double m = spec.magnitudes[0][static_cast<std::size_t>(k)];
        if (k == 10)
            CHECK(m == doctest::Approx(2.0 * n / 2.0).epsilon(1e-9));  // A*n/2 for a sine
        else
            CHECK(m < 1e-9);
    }
}

TEST_CASE("spectrum validates its window") {
    CHECK_THROWS_AS(spectrum(Eigen::MatrixXd::Zero(100, 4), 200.0), ConfigError);  // not a power of two
    CHECK_THROWS_AS(spectrum(Eigen::MatrixXd::Zero(32, 4), 200.0), ConfigError);   // too short
    CHECK_THROWS_AS(spectrum(Eigen::MatrixXd::Zero(128, 3), 200.0), ConfigError);  // wrong channel count
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(64, 4);
    bad(5, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(spectrum(bad, 200.0), ConfigError);
}

TEST_CASE("standard bands partition [1, nyquist)") {
    const auto bands = standard_bands(100.0);
    CHECK(bands[0].lo == 1.0);
    for (std::size_t b = 1; b < bands.size(); ++b) CHECK(bands[b].lo == bands[b - 1].hi);
    CHECK(bands[4].hi == 100.0);
    CHECK_THROWS_AS(standard_bands(25.0), ConfigError);
}

TEST_CASE("band powers split the spectrum energy by frequency") {
    const int n = 256;
    const double rate = 256.0;
    // Two bin-aligned tones: 10 Hz (alpha) and 20 Hz (beta).
    Eigen::MatrixXd w = tone_window(n, rate, 10.0, 1.0) + tone_window(n, rate, 20.0, 3.0);
    const Spectrum spec = spectrum(w, rate, Taper::Rectangular);
    const auto bands = standard_bands(rate / 2.0);
    const auto alpha = band_power(spec, bands[2]);
    const auto beta = band_power(spec, bands[3]);
    const auto delta = band_power(spec, bands[0]);
    for (int c = 0; c < kNumChannels; ++c) {
        CHECK(beta[static_cast<std::size_t>(c)] ==
              doctest::Approx(9.0 * alpha[static_cast<std::size_t>(c)]).epsilon(1e-9));
        CHECK(delta[static_cast<std::size_t>(c)] < 1e-12);
    }
}

TEST_CASE("an empty band intersection yields zero power, not an error") {
    const Eigen::MatrixXd w = random_window(128, 5);
    Spectrum spec = spectrum(w, 60.0, Taper::Rectangular);  // nyquist = 30
    const Band gamma{BandId::Gamma, 30.0, 30.0};
    const auto p = band_power(spec, gamma);
    for (double v : p) CHECK(v == 0.0);
}

TEST_CASE("alpha sub-bands are contained in alpha") {
    const Eigen::MatrixXd w = random_window(256, 9);
    const Spectrum spec = spectrum(w, 200.0, Taper::Rectangular);
    const auto [a1, a2] = alpha_subbands(spec);
    const auto alpha = band_power(spec, standard_bands(100.0)[2]);
    for (int c = 0; c < kNumChannels; ++c) {
        CHECK(a1[static_cast<std::size_t>(c)] + a2[static_cast<std::size_t>(c)] <=
              alpha[static_cast<std::size_t>(c)] + 1e-12);
    }
}

TEST_CASE("notch kills the mains tone and spares the passband") {
    StreamingCleaner cleaner(200.0, 50.0);
    // Analytic response: >= 30 dB attenuation at 50 Hz.
    CHECK(cleaner.magnitude_at(50.0) < std::pow(10.0, -30.0 / 20.0));
    // < 1 dB loss across the analysis range.
    for (double f = 1.0; f <= 45.0; f += 0.5) {
        CHECK(cleaner.magnitude_at(f) > std::pow(10.0, -1.0 / 20.0));
        CHECK(cleaner.magnitude_at(f) < 1.01);
    }
    // DC and drift are gone.
    CHECK(cleaner.magnitude_at(0.0) < 1e-12);
}

TEST_CASE("long mains tone is attenuated at least 30 dB end to end") {
    const double rate = 200.0;
    // Steady state is a true zero; the residual is all start-up transient
    // (energy ~25 for this Q), so 600 s amortizes it to ~2% RMS.
    const int n = 120000;
    synth::RawChunk chunk;
    chunk.rate = rate;
    chunk.samples.resize(n, kNumChannels);
    for (int i = 0; i < n; ++i) {
        const double v = std::sin(2.0 * kPi * 50.0 * i / rate);
        for (int c = 0; c < kNumChannels; ++c) chunk.samples(i, c) = v;
    }
    const auto cleaned = clean_artifacts(chunk, 50.0);
    const double in_rms = 1.0 / std::sqrt(2.0);
    const double out_rms = std::sqrt(cleaned.samples.col(0).squaredNorm() / n);
    CHECK(out_rms / in_rms < std::pow(10.0, -30.0 / 20.0));
}

TEST_CASE("10 Hz content survives cleaning within 1 dB") {
    const double rate = 200.0;
    const int n = 8000;
    synth::RawChunk chunk;
    chunk.rate = rate;
    chunk.samples.resize(n, kNumChannels);
    for (int i = 0; i < n; ++i) {
        const double v = std::sin(2.0 * kPi * 10.0 * i / rate);
        for (int c = 0; c < kNumChannels; ++c) chunk.samples(i, c) = v;
    }
    const auto cleaned = clean_artifacts(chunk, 50.0);
    // Skip the first quarter so the filter transient has decayed.
    const int skip = n / 4;
    const double in_rms = 1.0 / std::sqrt(2.0);
    const double out_rms =
        std::sqrt(cleaned.samples.col(0).tail(n - skip).squaredNorm() / (n - skip));
    CHECK(out_rms / in_rms > std::pow(10.0, -1.0 / 20.0));
    CHECK(out_rms / in_rms < std::pow(10.0, 1.0 / 20.0));
}

TEST_CASE("streaming cleaner is chunking-invariant; the pure form is not stateful") {
    synth::SignalGenerator gen(synth::default_profiles(), synth::NoiseSpec{50.0, 2.0, 0.5}, 21);
    const auto whole = gen.next_chunk(600);

    StreamingCleaner a(200.0, 50.0);
    const auto once = a.process(whole);

    StreamingCleaner b(200.0, 50.0);
    synth::RawChunk part1 = whole, part2 = whole;
    part1.samples = whole.samples.topRows(250);
    part2.samples = whole.samples.bottomRows(350);
    const auto out1 = b.process(part1);
    const auto out2 = b.process(part2);
    Eigen::MatrixXd joined(600, kNumChannels);
    joined.topRows(250) = out1.samples;
    joined.bottomRows(350) = out2.samples;
    CHECK((once.samples - joined).cwiseAbs().maxCoeff() < 1e-12);

    // clean_artifacts starts from zero state every call.
    const auto p1 = clean_artifacts(whole, 50.0);
    const auto p2 = clean_artifacts(whole, 50.0);
    CHECK(p1.samples == p2.samples);

    CHECK_THROWS_AS(StreamingCleaner(90.0, 50.0), ConfigError);
}

TEST_CASE("feature values are per-channel normalized band shares") {
    const Eigen::MatrixXd w = random_window(256, 31);
    const auto fv = features_of_window(w, 200.0, Taper::Hann);
    for (int c = 0; c < kNumChannels; ++c) {
        double sum = 0;
        for (int b = 0; b < kNumBands; ++b) {
            const double v = fv.values[static_cast<std::size_t>(c * kNumBands + b)];
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("a silent channel reports the uniform split") {
    Eigen::MatrixXd w = random_window(128, 8);
    w.col(2).setZero();
    const auto fv = features_of_window(w, 200.0, Taper::Hann);
    for (int b = 0; b < kNumBands; ++b)
        CHECK(fv.values[static_cast<std::size_t>(2 * kNumBands + b)] == doctest::Approx(0.2));
}

TEST_CASE("a 10 Hz tone concentrates its channel share in alpha") {
    const Eigen::MatrixXd w = tone_window(256, 200.0, 10.0, 5.0);
    const auto fv = features_of_window(w, 200.0, Taper::Hann);
    for (int c = 0; c < kNumChannels; ++c)
        CHECK(fv.values[static_cast<std::size_t>(c * kNumBands + 2)] > 0.95);
}

TEST_CASE("extractor frames tile the stream at the hop interval") {
    const int win = 256, hop = 5;
    synth::SignalGenerator gen(synth::default_profiles(), synth::NoiseSpec{50.0, 0.0, 0.3}, 77);
    gen.set_state(BrainState::RelaxedHandshake);

    // Feed in uneven chunks; compare to whole-window recomputation.
    std::vector<synth::RawChunk> chunks;
    for (int n : {80, 256, 19, 301, 44}) chunks.push_back(gen.next_chunk(n));
    const auto frames = extract_features(chunks, win, hop, 200.0);

    Eigen::MatrixXd all(700, kNumChannels);
    int row = 0;
    for (const auto& c : chunks) {
        all.middleRows(row, c.samples.rows()) = c.samples;
        row += static_cast<int>(c.samples.rows());
    }
    const std::size_t expected = (700 - win) / hop + 1;
    REQUIRE(frames.size() == expected);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        CHECK(frames[f].index == f);
        const auto ref = features_of_window(all.middleRows(static_cast<Eigen::Index>(f * hop), win),
                                            200.0, Taper::Hann, f);
        for (int i = 0; i < kFeatureDim; ++i)
            CHECK(frames[f].values[static_cast<std::size_t>(i)] ==
                  doctest::Approx(ref.values[static_cast<std::size_t>(i)]).epsilon(1e-12));
        REQUIRE(frames[f].truth.has_value());
        CHECK(*frames[f].truth == BrainState::RelaxedHandshake);
    }
}

TEST_CASE("frame truth is the truth of the window's last sample") {
    const int win = 64, hop = 64;
    FeatureExtractor ex(win, hop, 200.0);
    synth::SignalGenerator gen(synth::default_profiles(), synth::NoiseSpec{50.0, 0.0, 0.2}, 13);

    gen.set_state(BrainState::Idle);
    auto f1 = ex.push(gen.next_chunk(63));
    CHECK(f1.empty());
    gen.set_state(BrainState::ConcentratedCup);
    auto f2 = ex.push(gen.next_chunk(65));
    REQUIRE(f2.size() == 2);
    // Both windows end inside the ConcentratedCup segment.
    CHECK(*f2[0].truth == BrainState::ConcentratedCup);
    CHECK(*f2[1].truth == BrainState::ConcentratedCup);
}

TEST_CASE("extractor validates construction") {
    CHECK_THROWS_AS(FeatureExtractor(100, 5, 200.0), ConfigError);
    CHECK_THROWS_AS(FeatureExtractor(256, 0, 200.0), ConfigError);
    CHECK_THROWS_AS(FeatureExtractor(32, 5, 200.0), ConfigError);
}

TEST_CASE("focus metrics average alpha share over voting channels") {
    FeatureVector fv;
    // Channel 0: alpha 0.6, beta 0.2 -> 0.75. Channel 1: alpha 0.1, beta 0.3 -> 0.25.
    // Channels 2, 3: alpha + beta == 0 -> abstain.
    fv.values[2] = 0.6;
    fv.values[3] = 0.2;
    fv.values[kNumBands + 2] = 0.1;
    fv.values[kNumBands + 3] = 0.3;
    const auto [relax, conc] = focus_metrics(fv);
    CHECK(relax == doctest::Approx(0.5));
    CHECK(conc == doctest::Approx(0.5));

    FeatureVector empty;
    const auto [r0, c0] = focus_metrics(empty);
    CHECK(r0 == 0.5);
    CHECK(c0 == 0.5);
}

TEST_CASE("relaxed and concentrated defaults separate cleanly in the metric") {
    synth::SignalGenerator gen(synth::default_profiles(), synth::NoiseSpec{50.0, 0.0, 0.5}, 41);

    gen.set_state(BrainState::RelaxedHandshake);
    auto relaxed = features_of_window(gen.next_chunk(256).samples, 200.0, Taper::Hann);
    gen.set_state(BrainState::ConcentratedCup);
    auto focused = features_of_window(gen.next_chunk(256).samples, 200.0, Taper::Hann);
    gen.set_state(BrainState::Idle);
    auto idle = features_of_window(gen.next_chunk(256).samples, 200.0, Taper::Hann);

    CHECK(focus_metrics(relaxed).first > 0.85);
    CHECK(focus_metrics(focused).first < 0.2);
    const double mid = focus_metrics(idle).first;
    CHECK(mid > 0.25);
    CHECK(mid < 0.75);
}

TEST_CASE("feature csv rows are parseable and carry the label when asked") {
    FeatureVector fv;
    fv.index = 12;
    fv.values[0] = 0.25;
    fv.truth = BrainState::RelaxedHandshake;
    std::ostringstream with_out, without_out;
    append_feature_csv(with_out, fv, true);
    append_feature_csv(without_out, fv, false);
    const std::string with = with_out.str();
    const std::string without = without_out.str();
    CHECK(std::count(with.begin(), with.end(), ',') == 21);
    CHECK(std::count(without.begin(), without.end(), ',') == 20);
    CHECK(with.substr(0, 3) == "12,");
    CHECK(with.find(",1\n") != std::string::npos);  // ShakeHands = 1
}
