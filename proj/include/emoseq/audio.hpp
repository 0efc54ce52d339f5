#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "emoseq/binary_io.hpp"
#include "emoseq/error.hpp"

namespace emoseq {

/// Mono audio with samples nominally in [-1, 1].
struct AudioClip {
    std::vector<double> samples;
    int sample_rate_hz = 16000;

    /// Duration rounded up to whole milliseconds.
    std::int64_t duration_ms() const {
        const auto n = static_cast<std::int64_t>(samples.size());
        return (n * 1000 + sample_rate_hz - 1) / sample_rate_hz;
    }
};

// --- RIFF/WAVE, 16-bit PCM mono --------------------------------------------

struct WavInfo {
    int sample_rate_hz = 0;
    int channels = 0;
    int bits_per_sample = 0;
    std::size_t data_offset = 0;
    std::size_t data_bytes = 0;

    std::size_t n_samples() const { return data_bytes / static_cast<std::size_t>(2 * channels); }
    std::int64_t duration_ms() const {
        const auto n = static_cast<std::int64_t>(n_samples());
        return (n * 1000 + sample_rate_hz - 1) / sample_rate_hz;
    }
};

inline WavInfo parse_wav_header(std::string_view bytes, const std::string& source) {
    ByteReader r(bytes);
    if (r.get_bytes(4, "RIFF tag") != "RIFF") {
        throw FormatError(source + ": not a RIFF file", 0);
    }
    r.get_u32("RIFF size");
    if (r.get_bytes(4, "WAVE tag") != "WAVE") {
        throw FormatError(source + ": not a WAVE file", 8);
    }
    WavInfo info;
    bool have_fmt = false;
    while (!r.at_end()) {
        const auto tag = r.get_bytes(4, "chunk tag");
        const std::uint32_t size = r.get_u32("chunk size");
        if (tag == "fmt ") {
            const std::size_t at = r.offset();
            ByteReader fmt(r.get_bytes(size, "fmt chunk"));
            const auto format = fmt.get_u16("audio format");
            info.channels = fmt.get_u16("channels");
            info.sample_rate_hz = static_cast<int>(fmt.get_u32("sample rate"));
            fmt.get_u32("byte rate");
            fmt.get_u16("block align");
            info.bits_per_sample = fmt.get_u16("bits per sample");
            if (format != 1 || info.bits_per_sample != 16) {
                throw FormatError(source + ": only 16-bit PCM is supported", at);
            }
            if (info.channels != 1) {
                throw FormatError(source + ": " + std::to_string(info.channels) +
                                      "-channel audio; down-mix to mono externally",
                                  at);
            }
            if (info.sample_rate_hz <= 0) {
                throw FormatError(source + ": invalid sample rate", at);
            }
            have_fmt = true;
        } else if (tag == "data") {
            if (!have_fmt) {
                throw FormatError(source + ": data chunk before fmt chunk", r.offset());
            }
            info.data_offset = r.offset();
            info.data_bytes = std::min<std::size_t>(size, r.remaining());
            return info;
        } else {
            r.get_bytes(size + (size & 1u), "chunk body");
        }
    }
    throw FormatError(source + ": no data chunk", r.offset());
}

inline AudioClip read_wav(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    const WavInfo info = parse_wav_header(bytes, path.string());
    AudioClip clip;
    clip.sample_rate_hz = info.sample_rate_hz;
    ByteReader r(std::string_view(bytes).substr(info.data_offset, info.data_bytes));
    clip.samples.resize(info.n_samples());
    for (auto& s : clip.samples) {
        s = static_cast<double>(static_cast<std::int16_t>(r.get_u16("sample"))) / 32768.0;
    }
    return clip;
}

/// Duration of a WAV file without decoding its samples.
inline std::int64_t wav_duration_ms(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    return parse_wav_header(bytes, path.string()).duration_ms();
}

inline std::string encode_wav(const AudioClip& clip) {
    ByteWriter w;
    const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
    w.put_bytes("RIFF");
    w.put_u32(36 + data_bytes);
    w.put_bytes("WAVE");
    w.put_bytes("fmt ");
    w.put_u32(16);
    w.put_u16(1);
    w.put_u16(1);
    w.put_u32(static_cast<std::uint32_t>(clip.sample_rate_hz));
    w.put_u32(static_cast<std::uint32_t>(clip.sample_rate_hz * 2));
    w.put_u16(2);
    w.put_u16(16);
    w.put_bytes("data");
    w.put_u32(data_bytes);
    for (double s : clip.samples) {
        const double q = std::round(std::clamp(s, -1.0, 32767.0 / 32768.0) * 32768.0);
        w.put_u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    return w.bytes();
}

inline void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
    write_file_bytes(path, encode_wav(clip));
}

// --- resampling ------------------------------------------------------------

struct ResampleConfig {
    int half_width = 64;      // taps on each side of the interpolation point
    double kaiser_beta = 8.6;
};

/// Band-limited interpolation with a Kaiser-windowed sinc kernel. When
/// downsampling, the kernel cutoff drops to the target Nyquist. Output
/// length is round(n * target / source).
///
/// Output sample j sits at source position j * M / L with L/M the reduced
/// rate ratio, so the kernel only depends on j mod L and is tabulated once
/// per phase.
inline AudioClip resample(const AudioClip& audio, int target_rate_hz, const ResampleConfig& cfg = {}) {
    if (audio.sample_rate_hz <= 0 || target_rate_hz <= 0) {
        throw InvalidArgument("resample: sample rates must be positive");
    }
    if (audio.sample_rate_hz == target_rate_hz) {
        return audio;
    }
    const std::int64_t g = std::gcd(audio.sample_rate_hz, target_rate_hz);
    const std::int64_t up = target_rate_hz / g;
    const std::int64_t down = audio.sample_rate_hz / g;
    const double ratio = static_cast<double>(up) / static_cast<double>(down);
    const double cutoff = std::min(1.0, ratio);
    const double support = cfg.half_width / cutoff;
    const double i0_beta = std::cyl_bessel_i(0.0, cfg.kaiser_beta);

    struct Phase {
        std::int64_t first_tap = 0;
        std::vector<double> weights;
    };
    std::vector<Phase> phases(static_cast<std::size_t>(up));
    for (std::int64_t p = 0; p < up; ++p) {
        const double t = static_cast<double>(p * down) / static_cast<double>(up);
        auto& ph = phases[static_cast<std::size_t>(p)];
        ph.first_tap = static_cast<std::int64_t>(std::ceil(t - support));
        const auto last = static_cast<std::int64_t>(std::floor(t + support));
        for (std::int64_t k = ph.first_tap; k <= last; ++k) {
            const double d = t - static_cast<double>(k);
            const double u = d / support;
            double w = 0.0;
            if (u > -1.0 && u < 1.0) {
                const double x = std::numbers::pi * cutoff * d;
                const double sinc = d == 0.0 ? 1.0 : std::sin(x) / x;
                w = cutoff * sinc * std::cyl_bessel_i(0.0, cfg.kaiser_beta * std::sqrt(1.0 - u * u)) / i0_beta;
            }
            ph.weights.push_back(w);
        }
    }

    const auto n_in = static_cast<std::int64_t>(audio.samples.size());
    const auto n_out = static_cast<std::int64_t>(std::llround(static_cast<double>(n_in) * ratio));
    AudioClip out;
    out.sample_rate_hz = target_rate_hz;
    out.samples.resize(static_cast<std::size_t>(n_out));
    for (std::int64_t j = 0; j < n_out; ++j) {
        const auto& ph = phases[static_cast<std::size_t>(j % up)];
        const std::int64_t first = (j / up) * down + ph.first_tap;
        double acc = 0.0;
        for (std::size_t i = 0; i < ph.weights.size(); ++i) {
            const std::int64_t k = first + static_cast<std::int64_t>(i);
            if (k >= 0 && k < n_in) {
                acc += audio.samples[static_cast<std::size_t>(k)] * ph.weights[i];
            }
        }
        out.samples[static_cast<std::size_t>(j)] = acc;
    }
    return out;
}

}  // namespace emoseq
