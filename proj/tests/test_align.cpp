#include <algorithm>
#include <cstring>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "emoseq/align.hpp"

using namespace emoseq;

namespace {

TimedEmbedding item(std::initializer_list<float> v, std::uint32_t s, std::uint32_t e) {
    return {std::vector<float>(v), s, e};
}

TimedEmbeddings list(std::uint32_t dim, std::vector<TimedEmbedding> items) {
    return {dim, std::move(items)};
}

RowMatrixd rows(std::initializer_list<std::initializer_list<double>> r) {
    RowMatrixd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : r) {
        Eigen::Index j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

}  // namespace

TEST(TimedAlignment, SpanningWordIsDuplicated) {
    // One word from 200 to 600 ms over 250 ms segments touches segments 0, 1 and 2.
    const auto out = align_timed_embeddings(list(2, {item({1, 2}, 200, 600)}), build_timeline(1000, 250));
    EXPECT_EQ(out.rows, rows({{1, 2}, {1, 2}, {1, 2}, {0, 0}}));
}

TEST(TimedAlignment, CoSegmentWordsAreAveraged) {
    const auto out = align_timed_embeddings(
        list(2, {item({1, 0}, 0, 100), item({3, 4}, 100, 200), item({5, 8}, 150, 240)}), build_timeline(500, 250));
    EXPECT_EQ(out.rows, rows({{3, 4}, {0, 0}}));
}

TEST(TimedAlignment, StopWordsAreKept) {
    // "the", "a", "euh" all contribute: nothing is filtered by token.
    const auto out = align_timed_embeddings(
        list(1, {item({1}, 0, 50), item({2}, 60, 90), item({6}, 100, 200)}), build_timeline(250, 250));
    EXPECT_EQ(out.rows(0, 0), 3.0);
}

TEST(TimedAlignment, EmptySegmentsAreZero) {
    const auto out = align_timed_embeddings(list(3, {item({1, 1, 1}, 1000, 1100)}), build_timeline(1500, 250));
    EXPECT_TRUE(out.rows.topRows(4).isZero(0));
    EXPECT_TRUE((out.rows.row(4).array() == 1).all());
    EXPECT_TRUE(out.rows.row(5).isZero(0));

    const auto none = align_timed_embeddings(list(4, {}), build_timeline(700, 250));
    EXPECT_EQ(none.rows.rows(), 3);
    EXPECT_EQ(none.rows.cols(), 4);
    EXPECT_TRUE(none.rows.isZero(0));
}

TEST(TimedAlignment, HalfOpenBoundaries) {
    const auto tl = build_timeline(750, 250);
    EXPECT_EQ(align_timed_embeddings(list(1, {item({7}, 0, 250)}), tl).rows, rows({{7}, {0}, {0}}));
    EXPECT_EQ(align_timed_embeddings(list(1, {item({7}, 249, 251)}), tl).rows, rows({{7}, {7}, {0}}));
    EXPECT_EQ(align_timed_embeddings(list(1, {item({7}, 250, 251)}), tl).rows, rows({{0}, {7}, {0}}));
    // Past the end of the timeline the item is simply clipped.
    EXPECT_EQ(align_timed_embeddings(list(1, {item({7}, 600, 5000)}), tl).rows, rows({{0}, {0}, {7}}));
}

TEST(TimedAlignment, OverlappingSpansAccepted) {
    const auto out =
        align_timed_embeddings(list(1, {item({2}, 0, 300), item({4}, 100, 200)}), build_timeline(500, 250));
    EXPECT_EQ(out.rows, rows({{3}, {2}}));
}

TEST(TimedAlignment, PermutationInvariantUpToRounding) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::uint32_t> start(0, 4800), len(1, 700);
    std::normal_distribution<float> nd;
    for (int trial = 0; trial < 30; ++trial) {
        TimedEmbeddings e{6, {}};
        for (int i = 0; i < 40; ++i) {
            TimedEmbedding it;
            it.start_ms = start(rng);
            it.end_ms = it.start_ms + len(rng);
            for (int d = 0; d < 6; ++d) it.vector.push_back(nd(rng));
            e.items.push_back(it);
        }
        const auto tl = build_timeline(5000, 100);
        const auto ref = align_timed_embeddings(e, tl).rows;
        std::shuffle(e.items.begin(), e.items.end(), rng);
        EXPECT_TRUE(align_timed_embeddings(e, tl).rows.isApprox(ref, 1e-12));
    }
}

TEST(TimedAlignment, LengtheningSpanChangesOnlyNewSegment) {
    const auto tl = build_timeline(1000, 250);
    const auto base = align_timed_embeddings(list(1, {item({1}, 0, 100), item({5}, 300, 400)}), tl).rows;
    const auto longer = align_timed_embeddings(list(1, {item({1}, 0, 300), item({5}, 300, 400)}), tl).rows;
    const RowMatrixd diff = longer - base;
    EXPECT_EQ((diff.array() != 0).count(), 1);
    EXPECT_EQ(longer(1, 0), 3.0);
}

TEST(TimedAlignment, Errors) {
    const auto tl = build_timeline(1000, 250);
    EXPECT_THROW(align_timed_embeddings(list(0, {}), tl), SchemaError);
    EXPECT_THROW(align_timed_embeddings(list(2, {item({1}, 0, 10)}), tl), SchemaError);
    EXPECT_THROW(align_timed_embeddings(list(1, {item({1}, 10, 10)}), tl), SchemaError);
}

// --- frame averaging -------------------------------------------------------

namespace {
EmbeddingFrames frames_of(std::initializer_list<std::initializer_list<float>> r, double period = 20.0,
                          double offset = 0.0) {
    EmbeddingFrames f;
    f.vectors.resize(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : r) {
        Eigen::Index j = 0;
        for (float v : row) f.vectors(i, j++) = v;
        ++i;
    }
    f.frame_period_ms = period;
    f.start_offset_ms = offset;
    return f;
}
}  // namespace

TEST(FrameAveraging, MeanOfFramesStartingInSegment) {
    const auto out = average_frames_to_segments(frames_of({{1}, {2}, {9}}, 20.0), build_timeline(60, 100));
    EXPECT_EQ(out.rows(0, 0), 4.0);
}

TEST(FrameAveraging, ConstantFramesGiveConstantRows) {
    EmbeddingFrames f;
    f.vectors = RowMatrixf::Constant(300, 512, 0.375f);
    const auto out = average_frames_to_segments(f, build_timeline(6000, 250));
    EXPECT_EQ(out.dim(), 512u);
    EXPECT_EQ(out.n_rows(), 24u);
    EXPECT_TRUE((out.rows.array() == 0.375).all());
}

TEST(FrameAveraging, BoundaryAndOffset) {
    // A frame starting exactly at 250 ms belongs to segment 1.
    const auto out = average_frames_to_segments(frames_of({{1}, {3}}, 250.0), build_timeline(500, 250));
    EXPECT_EQ(out.rows, rows({{1}, {3}}));
    const auto shifted = average_frames_to_segments(frames_of({{1}, {3}}, 10.0, 245.0), build_timeline(500, 250));
    EXPECT_EQ(shifted.rows, rows({{1}, {3}}));
}

TEST(FrameAveraging, GapsCopyNeighbours) {
    const auto out =
        average_frames_to_segments(frames_of({{2}, {4}}, 500.0, 300.0), build_timeline(1250, 250));
    EXPECT_EQ(out.rows, rows({{2}, {2}, {2}, {4}, {4}}));
}

TEST(FrameAveraging, Errors) {
    EmbeddingFrames empty;
    EXPECT_THROW(average_frames_to_segments(empty, build_timeline(100, 100)), InvalidArgument);
    EXPECT_THROW(average_frames_to_segments(frames_of({{1}}, 20.0, 5000.0), build_timeline(100, 100)),
                 InvalidArgument);
}

// --- EMB1 / TEMB files -----------------------------------------------------

TEST(EmbeddingFiles, Emb1RoundTripIsBitExact) {
    std::mt19937_64 rng(2);
    std::normal_distribution<float> nd;
    EmbeddingFrames f;
    f.vectors.resize(37, 512);
    for (Eigen::Index i = 0; i < f.vectors.size(); ++i) f.vectors.data()[i] = nd(rng);
    f.frame_period_ms = 20.0;
    f.start_offset_ms = 12.5;
    const auto bytes = encode_embedding_frames(f);
    EXPECT_EQ(bytes.size(), 4 + 4 + 4 + 8 + 8 + 37 * 512 * 4u);
    const auto back = decode_embedding_file(bytes);
    ASSERT_TRUE(std::holds_alternative<EmbeddingFrames>(back));
    EXPECT_EQ(std::get<EmbeddingFrames>(back), f);
    EXPECT_EQ(encode_embedding_frames(std::get<EmbeddingFrames>(back)), bytes);
}

TEST(EmbeddingFiles, TembRoundTripIsBitExact) {
    TimedEmbeddings e{3, {item({1, 2, 3}, 0, 100), item({4, 5, 6}, 0, 100), item({-1, 0.5f, 2}, 50, 400)}};
    const auto bytes = encode_timed_embeddings(e);
    EXPECT_EQ(bytes.size(), 12 + 3 * (8 + 12u));
    const auto back = decode_embedding_file(bytes);
    ASSERT_TRUE(std::holds_alternative<TimedEmbeddings>(back));
    EXPECT_EQ(std::get<TimedEmbeddings>(back), e);

    const TimedEmbeddings none{768, {}};
    EXPECT_EQ(std::get<TimedEmbeddings>(decode_embedding_file(encode_timed_embeddings(none))), none);
}

TEST(EmbeddingFiles, CorruptInputsReportOffsets) {
    EmbeddingFrames f = frames_of({{1, 2}, {3, 4}});
    const auto bytes = encode_embedding_frames(f);
    try {
        decode_embedding_file("XXXX" + bytes.substr(4));
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }
    EXPECT_THROW(decode_embedding_file(bytes.substr(0, bytes.size() - 1)), FormatError);
    EXPECT_THROW(decode_embedding_file(bytes + "!"), FormatError);

    auto nan = bytes;
    const float q = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(nan.data() + 28 + 8, &q, 4);
    try {
        decode_embedding_file(nan);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 36u);
    }

    auto zero_period = bytes;
    const double z = 0.0;
    std::memcpy(zero_period.data() + 12, &z, 8);
    EXPECT_THROW(decode_embedding_file(zero_period), FormatError);
}

TEST(EmbeddingFiles, TembRejectsUnsortedAndEmptySpans) {
    const auto unsorted = encode_timed_embeddings({1, {item({1}, 100, 200), item({2}, 50, 300)}});
    try {
        decode_embedding_file(unsorted);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 12u + 12u);
    }
    const auto empty_span = encode_timed_embeddings({1, {item({1}, 100, 100)}});
    EXPECT_THROW(decode_embedding_file(empty_span), FormatError);
    EXPECT_THROW(encode_timed_embeddings({2, {item({1}, 0, 1)}}), SchemaError);
}
