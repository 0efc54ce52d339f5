#pragma once

// Synthetic corpus with a known latent emotion curve per conversation.
//
// e(t) is a smoothed random walk on the segment grid, scaled into [-0.9, 0.9].
// Every modality is a deterministic function of e plus noise:
//   audio       harmonic tone, pitch 160 + 60 e Hz, amplitude 0.25 exp(0.9 e)
//   acoustic    frame embeddings e a + b + noise
//   linguistic  one vector per sub-word, sign(e) u + noise, spans from words
//   lld         23 descriptors per 10 ms frame, e c + d + noise
//   annotators  e + independent noise per annotator
// Each conversation draws from its own generator, keyed by (seed, index).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "emoseq/align.hpp"
#include "emoseq/audio.hpp"
#include "emoseq/binary_io.hpp"
#include "emoseq/core.hpp"
#include "emoseq/csv.hpp"
#include "emoseq/manifest.hpp"

namespace emoseq {

struct SynthSpec {
    std::size_t n_train = 10;
    std::size_t n_dev = 3;
    std::size_t n_test = 3;
    std::int64_t min_duration_ms = 60000;
    std::int64_t max_duration_ms = 120000;
    std::int64_t segment_ms = 250;
    int sample_rate_hz = 8000;
    std::uint64_t seed = 7;
    std::string dimension = "satisfaction";
    std::size_t n_annotators = 3;
    double annotator_noise = 0.1;
    /// Autoregressive coefficient of the latent walk and its moving-average width.
    double walk_persistence = 0.97;
    std::size_t smoothing_segments = 9;
    double audio_noise = 0.005;
    std::size_t acoustic_dim = 512;
    double acoustic_frame_ms = 20.0;
    double acoustic_noise = 0.5;
    std::size_t linguistic_dim = 768;
    double linguistic_noise = 0.5;
    std::size_t lld_dim = 23;
    double lld_noise = 0.3;
    bool write_lld = true;

    void validate() const {
        if (n_train < 1 || n_dev < 1 || n_test < 1) {
            throw InvalidArgument("synth: every subset needs at least one conversation");
        }
        if (min_duration_ms < 1 || max_duration_ms < min_duration_ms) {
            throw InvalidArgument("synth: invalid duration range");
        }
        if (segment_ms < 1 || sample_rate_hz < 1000 || n_annotators < 1 || smoothing_segments < 1) {
            throw InvalidArgument("synth: invalid segment, rate, annotator or smoothing setting");
        }
        if (acoustic_dim < 1 || linguistic_dim < 1 || lld_dim < 1 || !(acoustic_frame_ms > 0)) {
            throw InvalidArgument("synth: embedding dimensions and frame period must be positive");
        }
    }
};

/// Latent curve on the segment grid of one conversation.
inline std::vector<double> latent_curve(std::size_t n_segments, const SynthSpec& spec, std::mt19937_64& rng) {
    std::normal_distribution<double> step(0.0, 1.0);
    std::vector<double> z(n_segments);
    double s = 0.0;
    for (auto& v : z) {
        s = spec.walk_persistence * s + step(rng);
        v = s;
    }
    const auto half = static_cast<std::ptrdiff_t>(spec.smoothing_segments / 2);
    const auto n = static_cast<std::ptrdiff_t>(n_segments);
    std::vector<double> e(n_segments);
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        double acc = 0.0;
        int cnt = 0;
        for (auto k = std::max<std::ptrdiff_t>(0, t - half); k <= std::min(n - 1, t + half); ++k) {
            acc += z[static_cast<std::size_t>(k)];
            ++cnt;
        }
        e[static_cast<std::size_t>(t)] = acc / cnt;
    }
    double peak = 0.0;
    for (double v : e) {
        peak = std::max(peak, std::abs(v));
    }
    if (peak > 0) {
        for (auto& v : e) {
            v *= 0.9 / peak;
        }
    }
    return e;
}

/// Value of the latent curve at time `ms`, interpolating between segment centres.
inline double latent_at(const std::vector<double>& e, std::int64_t segment_ms, double ms) {
    const double pos = ms / static_cast<double>(segment_ms) - 0.5;
    if (pos <= 0) {
        return e.front();
    }
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= e.size()) {
        return e.back();
    }
    const double f = pos - static_cast<double>(i);
    return e[i] * (1 - f) + e[i + 1] * f;
}

struct SynthConversation {
    std::string id;
    Subset subset = Subset::train;
    std::int64_t duration_ms = 0;
    std::vector<double> latent;
};

namespace detail {

inline std::vector<float> random_direction(std::size_t dim, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<float> v(dim);
    for (auto& x : v) {
        x = static_cast<float>(scale * nd(rng));
    }
    return v;
}

inline AudioClip synth_audio(const std::vector<double>& e, std::int64_t duration_ms, const SynthSpec& spec,
                             std::mt19937_64& rng) {
    AudioClip clip;
    clip.sample_rate_hz = spec.sample_rate_hz;
    const auto n = static_cast<std::size_t>(duration_ms * spec.sample_rate_hz / 1000);
    clip.samples.resize(n);
    std::normal_distribution<double> noise(0.0, spec.audio_noise);
    double phase = 0.0;
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t i = 0; i < n; ++i) {
        const double ms = 1000.0 * static_cast<double>(i) / spec.sample_rate_hz;
        const double v = latent_at(e, spec.segment_ms, ms);
        const double f0 = 160.0 + 60.0 * v;
        const double amp = 0.25 * std::exp(0.9 * v);
        phase = std::fmod(phase + two_pi * f0 / spec.sample_rate_hz, two_pi);
        const double tone = (std::sin(phase) + 0.5 * std::sin(2 * phase) + 0.25 * std::sin(3 * phase)) / 1.75;
        clip.samples[i] = std::clamp(amp * tone + noise(rng), -1.0, 1.0);
    }
    return clip;
}

}  // namespace detail

/// Writes the corpus under `out_dir` and returns its manifest, also saved as
/// out_dir/manifest.json with paths relative to out_dir.
inline DatasetManifest generate_synthetic(const SynthSpec& spec, const fs::path& out_dir,
                                          std::vector<SynthConversation>* latent_out = nullptr) {
    spec.validate();
    fs::create_directories(out_dir);

    std::mt19937_64 shared(detail::mix64(spec.seed));
    const auto acoustic_slope = detail::random_direction(spec.acoustic_dim, shared, 1.0);
    const auto acoustic_offset = detail::random_direction(spec.acoustic_dim, shared, 1.0);
    const auto linguistic_dir = detail::random_direction(spec.linguistic_dim, shared, 1.0);
    const auto lld_slope = detail::random_direction(spec.lld_dim, shared, 1.0);
    const auto lld_offset = detail::random_direction(spec.lld_dim, shared, 1.0);

    DatasetManifest manifest;
    manifest.base_dir = out_dir;
    std::vector<std::pair<Subset, std::size_t>> plan;
    for (std::size_t i = 0; i < spec.n_train; ++i) plan.emplace_back(Subset::train, i);
    for (std::size_t i = 0; i < spec.n_dev; ++i) plan.emplace_back(Subset::dev, i);
    for (std::size_t i = 0; i < spec.n_test; ++i) plan.emplace_back(Subset::test, i);

    for (std::size_t index = 0; index < plan.size(); ++index) {
        const auto [subset, k] = plan[index];
        char name[32];
        std::snprintf(name, sizeof name, "%s_%03zu", to_string(subset).c_str(), k);
        const std::string id = name;
        std::mt19937_64 rng(detail::mix64(detail::mix64(spec.seed) + index + 1));

        std::uniform_int_distribution<std::int64_t> dur(spec.min_duration_ms, spec.max_duration_ms);
        const std::int64_t duration_ms = dur(rng);
        const auto tl = build_timeline(duration_ms, spec.segment_ms, id);
        const auto e = latent_curve(tl.n_segments, spec, rng);
        std::normal_distribution<double> nd(0.0, 1.0);

        ConversationRecord rec;
        rec.id = id;
        rec.subset = subset;
        rec.segment_ms = spec.segment_ms;

        rec.audio = "audio/" + id + ".wav";
        write_wav(detail::synth_audio(e, duration_ms, spec, rng), out_dir / rec.audio);

        for (std::size_t a = 0; a < spec.n_annotators; ++a) {
            std::vector<double> track(e.size());
            for (std::size_t t = 0; t < e.size(); ++t) {
                track[t] = e[t] + spec.annotator_noise * nd(rng);
            }
            const std::string path = "annotations/" + id + "_" + spec.dimension + "_a" + std::to_string(a + 1) + ".csv";
            write_file_bytes(out_dir / path, format_annotation_csv(track));
            rec.annotations.push_back(path);
        }

        EmbeddingFrames frames;
        frames.frame_period_ms = spec.acoustic_frame_ms;
        const auto n_frames = static_cast<Eigen::Index>(std::floor(duration_ms / spec.acoustic_frame_ms));
        frames.vectors.resize(std::max<Eigen::Index>(n_frames, 1), static_cast<Eigen::Index>(spec.acoustic_dim));
        for (Eigen::Index i = 0; i < frames.vectors.rows(); ++i) {
            const double v = latent_at(e, spec.segment_ms, static_cast<double>(i) * spec.acoustic_frame_ms);
            for (std::size_t d = 0; d < spec.acoustic_dim; ++d) {
                frames.vectors(i, static_cast<Eigen::Index>(d)) =
                    static_cast<float>(v * acoustic_slope[d] + acoustic_offset[d] + spec.acoustic_noise * nd(rng));
            }
        }
        rec.embeddings["acoustic-embed"] = "embeddings/" + id + ".emb1";
        write_embedding_file(frames, out_dir / rec.embeddings["acoustic-embed"]);

        std::vector<TimedWord> words;
        TimedEmbeddings temb;
        temb.dim = static_cast<std::uint32_t>(spec.linguistic_dim);
        static const char* vocab[] = {"the", "a", "yes", "no", "account", "card", "please", "thank",
                                      "you", "bank", "transfer", "problem", "okay", "i", "would", "like"};
        std::uniform_int_distribution<std::int64_t> word_len(200, 600);
        std::uniform_int_distribution<std::int64_t> pause(0, 900);
        std::uniform_int_distribution<int> n_sub(1, 3);
        std::uniform_int_distribution<std::size_t> pick(0, std::size(vocab) - 1);
        std::bernoulli_distribution speaks(0.75);
        std::int64_t t = pause(rng);
        while (t < duration_ms) {
            const std::int64_t end = std::min(duration_ms, t + word_len(rng));
            if (end <= t) {
                break;
            }
            if (speaks(rng)) {
                words.push_back({vocab[pick(rng)], t, end});
                const double v = latent_at(e, spec.segment_ms, 0.5 * static_cast<double>(t + end));
                const double sign = v >= 0 ? 1.0 : -1.0;
                const int pieces = n_sub(rng);
                for (int p = 0; p < pieces; ++p) {
                    TimedEmbedding item;
                    item.start_ms = static_cast<std::uint32_t>(t);
                    item.end_ms = static_cast<std::uint32_t>(end);
                    item.vector.resize(spec.linguistic_dim);
                    for (std::size_t d = 0; d < spec.linguistic_dim; ++d) {
                        item.vector[d] = static_cast<float>(sign * linguistic_dir[d] + spec.linguistic_noise * nd(rng));
                    }
                    temb.items.push_back(std::move(item));
                }
            }
            t = end + pause(rng);
        }
        rec.transcript = "transcripts/" + id + ".json";
        write_file_bytes(out_dir / *rec.transcript, format_transcript(words));
        rec.embeddings["linguistic-embed"] = "embeddings/" + id + ".temb";
        write_embedding_file(temb, out_dir / rec.embeddings["linguistic-embed"]);

        if (spec.write_lld) {
            std::string lld = "time_ms";
            for (std::size_t d = 0; d < spec.lld_dim; ++d) {
                lld += ",v" + std::to_string(d + 1);
            }
            lld += "\n";
            for (std::int64_t ms = 0; ms < duration_ms; ms += 10) {
                const double v = latent_at(e, spec.segment_ms, static_cast<double>(ms));
                lld += std::to_string(ms);
                for (std::size_t d = 0; d < spec.lld_dim; ++d) {
                    lld += "," + csv::format_fixed(v * lld_slope[d] + lld_offset[d] + spec.lld_noise * nd(rng), 5);
                }
                lld += "\n";
            }
            rec.embeddings["egemaps-stats"] = "lld/" + id + ".csv";
            write_file_bytes(out_dir / rec.embeddings["egemaps-stats"], lld);
        }

        write_file_bytes(out_dir / ("latent/" + id + ".csv"), format_annotation_csv(e));
        if (latent_out) {
            latent_out->push_back({id, subset, duration_ms, e});
        }
        manifest.conversations.push_back(std::move(rec));
    }
    save_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

}  // namespace emoseq
