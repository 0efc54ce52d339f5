#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "emoseq/audio.hpp"
#include "emoseq/feature_cache.hpp"
#include "emoseq/mfcc.hpp"
#include "emoseq/segment_stats.hpp"
#include "oracles.hpp"

using namespace emoseq;
namespace fs = std::filesystem;

namespace {

AudioClip tone(double hz, int rate, std::size_t n, double amp = 0.5) {
    AudioClip c;
    c.sample_rate_hz = rate;
    c.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        c.samples[i] = amp * std::sin(2 * std::numbers::pi * hz * static_cast<double>(i) / rate);
    }
    return c;
}

AudioClip noise_clip(int rate, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    AudioClip c;
    c.sample_rate_hz = rate;
    c.samples.resize(n);
    for (auto& s : c.samples) s = u(rng);
    return c;
}

}  // namespace

TEST(Resample, SameRateIsIdentity) {
    const auto a = noise_clip(8000, 1234, 1);
    const auto b = resample(a, 8000);
    EXPECT_EQ(b.samples, a.samples);
    EXPECT_EQ(b.sample_rate_hz, 8000);
}

TEST(Resample, OutputLength) {
    EXPECT_EQ(resample(noise_clip(8000, 8000, 2), 16000).samples.size(), 16000u);
    EXPECT_EQ(resample(noise_clip(16000, 1001, 2), 8000).samples.size(), 501u);
    EXPECT_EQ(resample(noise_clip(8000, 333, 2), 22050).samples.size(),
              static_cast<std::size_t>(std::llround(333 * 22050.0 / 8000)));
}

TEST(Resample, RejectsBadRates) {
    EXPECT_THROW(resample(noise_clip(8000, 10, 1), 0), InvalidArgument);
    AudioClip bad = noise_clip(8000, 10, 1);
    bad.sample_rate_hz = -1;
    EXPECT_THROW(resample(bad, 16000), InvalidArgument);
}

TEST(Resample, KeepsDominantFrequency) {
    // 0.25 s: DFT bin k is 4k Hz both before and after upsampling.
    for (double hz : {440.0, 1000.0, 3000.0}) {
        const auto up = resample(tone(hz, 8000, 2000), 16000);
        EXPECT_EQ(oracle::dft_peak_bin(up.samples), static_cast<std::size_t>(hz / 4));
    }
}

TEST(Resample, UpsampledSamplesInterpolateTheTone) {
    const auto src = tone(440, 8000, 8000);
    const auto up = resample(src, 16000);
    // Away from the edges every output sample should sit on the continuous tone.
    double worst = 0;
    for (std::size_t j = 400; j < 15600; ++j) {
        const double expect = 0.5 * std::sin(2 * std::numbers::pi * 440.0 * static_cast<double>(j) / 16000);
        worst = std::max(worst, std::abs(up.samples[j] - expect));
    }
    EXPECT_LT(worst, 1e-3);
}

TEST(Mfcc, DefaultShape24Coefficients) {
    const auto clip = noise_clip(16000, 16000, 4);
    const auto f = extract_mfcc(clip);
    EXPECT_EQ(f.frames.cols(), 24);
    EXPECT_EQ(f.frames.rows(), 98);
    EXPECT_DOUBLE_EQ(f.hop_ms, 10.0);
    EXPECT_DOUBLE_EQ(f.win_ms, 30.0);
}

TEST(Mfcc, SilenceGivesIdenticalFrames) {
    AudioClip silent;
    silent.sample_rate_hz = 8000;
    silent.samples.assign(4000, 0.0);
    const auto f = extract_mfcc(silent);
    for (Eigen::Index i = 1; i < f.frames.rows(); ++i) {
        EXPECT_EQ(f.frames.row(i), f.frames.row(0));
    }
    EXPECT_NEAR(f.frames(0, 0), std::log(1e-10) * std::sqrt(40.0), 1e-9);
}

TEST(Mfcc, Deterministic) {
    const auto clip = noise_clip(8000, 5000, 9);
    EXPECT_EQ(extract_mfcc(clip).frames, extract_mfcc(clip).frames);
}

TEST(Mfcc, ShortAudioRejected) {
    EXPECT_THROW(extract_mfcc(noise_clip(16000, 479, 1)), InvalidArgument);
    EXPECT_NO_THROW(extract_mfcc(noise_clip(16000, 480, 1)));
}

TEST(Mfcc, FrameCountFormula) {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> len(480, 40000);
    const auto geo = FrameGeometry::from(MfccConfig{}, 16000);
    EXPECT_EQ(geo.win, 480);
    EXPECT_EQ(geo.hop, 160);
    EXPECT_EQ(geo.n_fft, 512);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t s = len(rng);
        EXPECT_EQ(geo.n_frames(s), (s - 480) / 160 + 1);
    }
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t s = len(rng) / 4;
        if (s < 480) continue;
        EXPECT_EQ(extract_mfcc(noise_clip(16000, s, trial)).n_frames(), (s - 480) / 160 + 1);
    }
}

TEST(Mfcc, MatchesBruteForceOracle) {
    for (int rate : {8000, 16000}) {
        const auto clip = noise_clip(rate, static_cast<std::size_t>(rate / 2), 100 + rate);
        const auto f = extract_mfcc(clip);
        const auto geo = FrameGeometry::from(MfccConfig{}, rate);
        for (Eigen::Index i = 0; i < f.frames.rows(); i += 7) {
            std::vector<double> frame(clip.samples.begin() + i * geo.hop,
                                      clip.samples.begin() + i * geo.hop + geo.win);
            const auto ref = oracle::mfcc_frame(frame, rate, geo.n_fft, 40, 24, 1e-10);
            for (int k = 0; k < 24; ++k) {
                EXPECT_NEAR(f.frames(i, k), ref[static_cast<std::size_t>(k)], 1e-6) << "rate " << rate << " frame " << i;
            }
        }
    }
}

TEST(MelFilterbank, TrianglesPeakAtOne) {
    const auto fb = mel_filterbank(40, 512, 16000, 0, 8000);
    for (Eigen::Index m = 0; m < fb.rows(); ++m) {
        EXPECT_GT(fb.row(m).maxCoeff(), 0.5);
        EXPECT_LE(fb.row(m).maxCoeff(), 1.0);
        EXPECT_GE(fb.row(m).minCoeff(), 0.0);
    }
}

TEST(DctOrthonormal, SquareIsOrthogonal) {
    const auto d = dct2_orthonormal(40, 40);
    EXPECT_TRUE((d * d.transpose()).isIdentity(1e-12));
}

// --- per-segment summaries -------------------------------------------------

TEST(Summarize, ShapeAndFramesPerSegment) {
    const auto clip = noise_clip(8000, 8000, 5);
    const auto frames = extract_mfcc(clip);
    const auto tl = build_timeline(clip.duration_ms(), 250);
    const auto fm = summarize_segments(frames, tl);
    EXPECT_EQ(fm.dim(), 48u);
    EXPECT_EQ(fm.n_rows(), 4u);
    EXPECT_EQ(fm.feature_set, "mfcc-stats");
    // Frames start every 10 ms: 25 starts in each of the first three segments.
    const auto& x = frames.frames;
    Eigen::RowVectorXd mean = x.topRows(25).colwise().mean();
    EXPECT_TRUE(fm.rows.row(0).head(24).isApprox(mean, 1e-12));
    mean = x.middleRows(25, 25).colwise().mean();
    EXPECT_TRUE(fm.rows.row(1).head(24).isApprox(mean, 1e-12));
}

TEST(Summarize, ConstantFramesHaveZeroStd) {
    FrameMatrix f;
    f.frames = RowMatrixd::Constant(100, 3, 2.5);
    const auto fm = summarize_segments(f, build_timeline(1000, 250));
    EXPECT_TRUE(fm.rows.rightCols(3).isZero(0));
    EXPECT_TRUE((fm.rows.leftCols(3).array() == 2.5).all());
}

TEST(Summarize, AgreesWithTwoPassOracle) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> nd(1.0, 3.0);
    FrameMatrix f;
    f.frames.resize(517, 5);
    for (Eigen::Index i = 0; i < f.frames.size(); ++i) f.frames.data()[i] = nd(rng) + 1e3;
    const auto tl = build_timeline(5170, 100);
    const auto fm = summarize_segments(f, tl);
    for (std::size_t t = 0; t < tl.n_segments; ++t) {
        for (Eigen::Index c = 0; c < 5; ++c) {
            double s = 0;
            int n = 0;
            for (Eigen::Index i = 0; i < f.frames.rows(); ++i) {
                if (static_cast<std::size_t>(i / 10) == t) {
                    s += f.frames(i, c);
                    ++n;
                }
            }
            const double mean = s / n;
            double v = 0;
            for (Eigen::Index i = 0; i < f.frames.rows(); ++i) {
                if (static_cast<std::size_t>(i / 10) == t) v += (f.frames(i, c) - mean) * (f.frames(i, c) - mean);
            }
            EXPECT_NEAR(fm.rows(static_cast<Eigen::Index>(t), c), mean, 1e-10);
            EXPECT_NEAR(fm.rows(static_cast<Eigen::Index>(t), c + 5), std::sqrt(v / n), 1e-10);
        }
    }
}

TEST(Summarize, EmptyTailCopiesPreviousRow) {
    FrameMatrix f;
    f.frames.resize(20, 1);
    for (Eigen::Index i = 0; i < 20; ++i) f.frames(i, 0) = static_cast<double>(i);
    // 20 frames cover 0..199 ms of starts; the timeline has a fourth segment.
    const auto fm = summarize_segments(f, build_timeline(400, 100));
    ASSERT_EQ(fm.n_rows(), 4u);
    EXPECT_EQ(fm.rows.row(2), fm.rows.row(1));
    EXPECT_EQ(fm.rows.row(3), fm.rows.row(1));
}

TEST(Summarize, NoFramesRejected) {
    FrameMatrix f;
    f.frames.resize(0, 3);
    EXPECT_THROW(summarize_segments(f, build_timeline(100, 100)), InvalidArgument);
}

namespace {
std::string lld_header(int k) {
    std::string h = "time_ms";
    for (int i = 1; i <= k; ++i) h += ",v" + std::to_string(i);
    return h + "\n";
}
}  // namespace

TEST(Lld, TwentyThreeDescriptorsGiveFortySix) {
    std::string text = lld_header(23);
    for (int ms = 0; ms < 1000; ms += 10) {
        text += std::to_string(ms);
        for (int i = 0; i < 23; ++i) text += "," + std::to_string(i + ms / 250);
        text += "\n";
    }
    const auto fm = parse_lld_csv(text, "lld.csv", build_timeline(1000, 250));
    EXPECT_EQ(fm.dim(), 46u);
    EXPECT_EQ(fm.feature_set, "egemaps-stats");
    EXPECT_DOUBLE_EQ(fm.rows(2, 0), 2.0);
    EXPECT_DOUBLE_EQ(fm.rows(2, 23), 0.0);
}

TEST(Lld, SingleRowPerSegment) {
    const std::string text = lld_header(2) + "0,1,2\n250,3,4\n";
    const auto fm = parse_lld_csv(text, "lld.csv", build_timeline(500, 250));
    EXPECT_TRUE(fm.rows.rightCols(2).isZero(0));
    EXPECT_EQ(fm.rows(1, 1), 4.0);
}

TEST(Lld, ErrorsNameTheRow) {
    const auto tl = build_timeline(1000, 250);
    std::string text = lld_header(23);
    text += "0";
    for (int i = 0; i < 23; ++i) text += ",1";
    text += "\n10";
    for (int i = 0; i < 22; ++i) text += ",1";
    text += "\n";
    try {
        parse_lld_csv(text, "lld.csv", tl);
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
    }
    try {
        parse_lld_csv(lld_header(1) + "20,1\n10,2\n", "lld.csv", tl);
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_lld_csv("t,v1\n0,1\n", "lld.csv", tl), SchemaError);
    EXPECT_THROW(parse_lld_csv(lld_header(1) + "0,x\n", "lld.csv", tl), SchemaError);
}

// --- speaker flag ----------------------------------------------------------

namespace {
FeatureMatrix zeros(std::size_t n, std::size_t d, std::int64_t seg = 250) {
    FeatureMatrix m;
    m.feature_set = "mfcc-stats";
    m.rows = RowMatrixd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    m.timeline = build_timeline(static_cast<std::int64_t>(n) * seg, seg);
    return m;
}

std::vector<double> flag_oracle(const SpeakerTurns& turns, std::size_t n, std::int64_t seg) {
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t) {
        std::int64_t covered = 0;
        for (std::int64_t ms = static_cast<std::int64_t>(t) * seg; ms < static_cast<std::int64_t>(t + 1) * seg; ++ms) {
            for (const auto& [s, e] : turns.intervals) {
                if (ms >= s && ms < e) {
                    ++covered;
                    break;
                }
            }
        }
        out[t] = 2 * covered >= seg ? 1.0 : 0.0;
    }
    return out;
}
}  // namespace

TEST(SpeakerFlag, AddsOneColumn) {
    const auto fm = append_speaker_flag(zeros(6, 48), SpeakerTurns{});
    EXPECT_EQ(fm.dim(), 49u);
    EXPECT_TRUE(fm.rows.col(48).isZero(0));
}

TEST(SpeakerFlag, FullSegmentTurn) {
    const auto fm = append_speaker_flag(zeros(5, 2), SpeakerTurns{{{500, 750}}});
    EXPECT_EQ(fm.rows.col(2).transpose(), Eigen::RowVectorXd((Eigen::RowVectorXd(5) << 0, 0, 1, 0, 0).finished()));
}

TEST(SpeakerFlag, MatchesIntervalOracle) {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::int64_t> gap(0, 400), len(1, 600);
    for (int trial = 0; trial < 50; ++trial) {
        SpeakerTurns turns;
        std::int64_t t = gap(rng);
        while (t < 5000) {
            const auto e = t + len(rng);
            turns.intervals.emplace_back(t, e);
            t = e + 1 + gap(rng);
        }
        const auto fm = append_speaker_flag(zeros(20, 1), turns);
        const auto ref = flag_oracle(turns, 20, 250);
        for (std::size_t i = 0; i < 20; ++i) {
            EXPECT_EQ(fm.rows(static_cast<Eigen::Index>(i), 1), ref[i]) << "segment " << i;
        }
    }
}

TEST(SpeakerFlag, TurnsFromWordsMergeTouchingSpans) {
    const std::vector<TimedWord> words{{"a", 0, 100}, {"b", 100, 200}, {"b", 100, 200}, {"c", 300, 400}};
    const auto turns = turns_from_words(words);
    ASSERT_EQ(turns.intervals.size(), 2u);
    EXPECT_EQ(turns.intervals[0], std::make_pair(std::int64_t{0}, std::int64_t{200}));
    EXPECT_EQ(turns_from_words(words, 100).intervals.size(), 1u);
}

TEST(SpeakerFlag, RejectsOverlappingTurns) {
    EXPECT_THROW(append_speaker_flag(zeros(2, 1), SpeakerTurns{{{0, 300}, {200, 400}}}), InvalidArgument);
}

// --- WAV -------------------------------------------------------------------

TEST(Wav, RoundTripWithinQuantization) {
    const auto clip = noise_clip(8000, 999, 3);
    const auto dir = fs::temp_directory_path() / "emoseq_test_wav";
    write_wav(clip, dir / "a.wav");
    const auto back = read_wav(dir / "a.wav");
    ASSERT_EQ(back.samples.size(), clip.samples.size());
    EXPECT_EQ(back.sample_rate_hz, 8000);
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        EXPECT_NEAR(back.samples[i], clip.samples[i], 1.0 / 32768);
    }
    EXPECT_EQ(wav_duration_ms(dir / "a.wav"), 125);
    fs::remove_all(dir);
}

TEST(Wav, StereoRejectedWithAdvice) {
    auto bytes = encode_wav(noise_clip(8000, 10, 1));
    bytes[22] = 2;  // channel count
    try {
        parse_wav_header(bytes, "s.wav");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("down-mix to mono"), std::string::npos);
    }
}

TEST(Wav, NotRiff) {
    EXPECT_THROW(parse_wav_header("RIFX0000WAVE", "x.wav"), FormatError);
    EXPECT_THROW(parse_wav_header("RI", "x.wav"), FormatError);
}

// --- FEA1 ------------------------------------------------------------------

TEST(FeatureCache, RoundTripIsExactForFloatValues) {
    std::mt19937_64 rng(1);
    std::normal_distribution<float> nd;
    FeatureMatrix m = zeros(13, 7, 100);
    m.feature_set = "mfcc-stats+spk";
    for (Eigen::Index i = 0; i < m.rows.size(); ++i) m.rows.data()[i] = nd(rng);
    const auto bytes = encode_feature_cache(m);
    EXPECT_EQ(bytes.substr(0, 4), "FEA1");
    EXPECT_EQ(bytes.size(), 4 + 4 + 4 + 8 + 13 * 7 * 4 + 2 + m.feature_set.size());
    const auto back = decode_feature_cache(bytes);
    EXPECT_EQ(back.rows, m.rows);
    EXPECT_EQ(back.feature_set, m.feature_set);
    EXPECT_EQ(back.timeline.segment_ms, 100);
    EXPECT_EQ(back.timeline.n_segments, 13u);
    EXPECT_EQ(encode_feature_cache(back), bytes);
}

TEST(FeatureCache, CorruptInputs) {
    FeatureMatrix m = zeros(3, 2);
    const auto bytes = encode_feature_cache(m);
    EXPECT_THROW(decode_feature_cache("FEA2" + bytes.substr(4)), FormatError);
    for (std::size_t cut : {2ul, 10ul, 30ul, bytes.size() - 1}) {
        EXPECT_THROW(decode_feature_cache(bytes.substr(0, cut)), FormatError) << cut;
    }
    EXPECT_THROW(decode_feature_cache(bytes + "x"), FormatError);
    auto nan = bytes;
    const float q = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(nan.data() + 20, &q, 4);
    try {
        decode_feature_cache(nan);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 20u);
    }
}
