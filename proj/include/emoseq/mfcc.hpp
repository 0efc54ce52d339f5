#pragma once

// MFCC frames: periodic Hann window, power spectrum, HTK-scale triangular
// mel filterbank, floored natural log, orthonormal DCT-II.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include "emoseq/audio.hpp"
#include "emoseq/core.hpp"

namespace emoseq {

struct MfccConfig {
    int n_mfcc = 24;
    int n_mels = 40;
    double hop_ms = 10.0;
    double win_ms = 30.0;
    double log_floor = 1e-10;
    double fmin_hz = 0.0;
    double fmax_hz = 0.0;  // 0 selects the Nyquist frequency
};

/// Frame i covers samples [i * hop, i * hop + win).
struct FrameMatrix {
    RowMatrixd frames;
    double hop_ms = 10.0;
    double win_ms = 30.0;

    std::size_t n_frames() const { return static_cast<std::size_t>(frames.rows()); }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

inline int next_pow2(int n) {
    int p = 1;
    while (p < n) {
        p <<= 1;
    }
    return p;
}

/// Frame geometry in samples for a given rate.
struct FrameGeometry {
    int win = 0;
    int hop = 0;
    int n_fft = 0;

    static FrameGeometry from(const MfccConfig& cfg, int sample_rate_hz) {
        FrameGeometry g;
        g.win = static_cast<int>(std::lround(cfg.win_ms * sample_rate_hz / 1000.0));
        g.hop = static_cast<int>(std::lround(cfg.hop_ms * sample_rate_hz / 1000.0));
        g.n_fft = next_pow2(g.win);
        return g;
    }

    /// floor((S - W) / H) + 1, or 0 when the signal is shorter than a window.
    std::size_t n_frames(std::size_t n_samples) const {
        if (n_samples < static_cast<std::size_t>(win)) {
            return 0;
        }
        return (n_samples - static_cast<std::size_t>(win)) / static_cast<std::size_t>(hop) + 1;
    }
};

/// n_mels x (n_fft / 2 + 1) triangular weights.
inline RowMatrixd mel_filterbank(int n_mels, int n_fft, int sample_rate_hz, double fmin_hz, double fmax_hz) {
    const int n_bins = n_fft / 2 + 1;
    const double mel_lo = hz_to_mel(fmin_hz);
    const double mel_hi = hz_to_mel(fmax_hz);
    std::vector<double> edges(static_cast<std::size_t>(n_mels + 2));
    for (int i = 0; i < n_mels + 2; ++i) {
        edges[static_cast<std::size_t>(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
    }
    RowMatrixd fb = RowMatrixd::Zero(n_mels, n_bins);
    for (int m = 0; m < n_mels; ++m) {
        const double left = edges[static_cast<std::size_t>(m)];
        const double center = edges[static_cast<std::size_t>(m + 1)];
        const double right = edges[static_cast<std::size_t>(m + 2)];
        for (int k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate_hz / n_fft;
            const double rise = (f - left) / (center - left);
            const double fall = (right - f) / (right - center);
            fb(m, k) = std::max(0.0, std::min(rise, fall));
        }
    }
    return fb;
}

/// Orthonormal DCT-II basis truncated to the first n_out rows.
inline RowMatrixd dct2_orthonormal(int n_out, int n_in) {
    RowMatrixd d(n_out, n_in);
    for (int k = 0; k < n_out; ++k) {
        const double scale = k == 0 ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
        for (int n = 0; n < n_in; ++n) {
            d(k, n) = scale * std::cos(std::numbers::pi * k * (n + 0.5) / n_in);
        }
    }
    return d;
}

inline FrameMatrix extract_mfcc(const AudioClip& audio, const MfccConfig& cfg = {}) {
    if (cfg.n_mfcc < 1 || cfg.n_mels < cfg.n_mfcc || cfg.hop_ms <= 0 || cfg.win_ms <= 0) {
        throw InvalidArgument("extract_mfcc: invalid configuration");
    }
    const auto geo = FrameGeometry::from(cfg, audio.sample_rate_hz);
    if (geo.win < 2 || geo.hop < 1) {
        throw InvalidArgument("extract_mfcc: window or hop shorter than one sample");
    }
    const std::size_t n_frames = geo.n_frames(audio.samples.size());
    if (n_frames == 0) {
        throw InvalidArgument("extract_mfcc: audio of " + std::to_string(audio.samples.size()) +
                              " samples is shorter than one " + std::to_string(geo.win) +
                              "-sample window");
    }
    const double nyquist = audio.sample_rate_hz / 2.0;
    const double fmax = cfg.fmax_hz > 0.0 ? std::min(cfg.fmax_hz, nyquist) : nyquist;
    const RowMatrixd fb = mel_filterbank(cfg.n_mels, geo.n_fft, audio.sample_rate_hz, cfg.fmin_hz, fmax);
    const RowMatrixd dct = dct2_orthonormal(cfg.n_mfcc, cfg.n_mels);

    std::vector<double> window(static_cast<std::size_t>(geo.win));
    for (int n = 0; n < geo.win; ++n) {
        window[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / geo.win);
    }

    const int n_bins = geo.n_fft / 2 + 1;
    Eigen::FFT<double> fft;
    std::vector<double> buf(static_cast<std::size_t>(geo.n_fft), 0.0);
    std::vector<std::complex<double>> spec;
    Eigen::VectorXd power(n_bins);

    FrameMatrix out;
    out.hop_ms = 1000.0 * geo.hop / audio.sample_rate_hz;
    out.win_ms = 1000.0 * geo.win / audio.sample_rate_hz;
    out.frames.resize(static_cast<Eigen::Index>(n_frames), cfg.n_mfcc);
    for (std::size_t i = 0; i < n_frames; ++i) {
        const std::size_t start = i * static_cast<std::size_t>(geo.hop);
        for (int n = 0; n < geo.win; ++n) {
            buf[static_cast<std::size_t>(n)] = audio.samples[start + static_cast<std::size_t>(n)] *
                                               window[static_cast<std::size_t>(n)];
        }
        fft.fwd(spec, buf);
        for (int k = 0; k < n_bins; ++k) {
            power(k) = std::norm(spec[static_cast<std::size_t>(k)]);
        }
        const Eigen::VectorXd logmel = (fb * power).array().max(cfg.log_floor).log().matrix();
        out.frames.row(static_cast<Eigen::Index>(i)) = (dct * logmel).transpose();
    }
    return out;
}

}  // namespace emoseq
