#pragma once

// Mapping of pre-trained embeddings onto the emotional-segment grid, and the
// two interchange formats produced by the embedding exporter:
//
//   EMB1 (frame-level): magic | u32 D | u32 N | f64 frame_period_ms |
//                       f64 start_offset_ms | N*D f32 row-major
//   TEMB (time-stamped): magic | u32 D | u32 N |
//                        N * (u32 start_ms | u32 end_ms | D f32)
//
// Everything little-endian.

#include <filesystem>
#include <type_traits>
#include <string>
#include <variant>
#include <vector>

#include "emoseq/binary_io.hpp"
#include "emoseq/core.hpp"

namespace emoseq {

struct TimedEmbedding {
    std::vector<float> vector;
    std::uint32_t start_ms = 0;
    std::uint32_t end_ms = 0;

    bool operator==(const TimedEmbedding&) const = default;
};

/// The dimension travels with the list so an empty transcript still has one.
struct TimedEmbeddings {
    std::uint32_t dim = 0;
    std::vector<TimedEmbedding> items;

    bool operator==(const TimedEmbeddings&) const = default;
};

struct EmbeddingFrames {
    RowMatrixf vectors;
    double frame_period_ms = 20.0;
    double start_offset_ms = 0.0;

    std::size_t n_frames() const { return static_cast<std::size_t>(vectors.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }

    bool operator==(const EmbeddingFrames& o) const {
        return vectors.rows() == o.vectors.rows() && vectors.cols() == o.vectors.cols() &&
               vectors == o.vectors && frame_period_ms == o.frame_period_ms &&
               start_offset_ms == o.start_offset_ms;
    }
};

/// Every item contributes to every segment its [start, end) span overlaps;
/// each row is the mean of its contributors, or zeros when there are none.
/// Items are never filtered, whatever their token.
inline FeatureMatrix align_timed_embeddings(const TimedEmbeddings& emb, const SegmentTimeline& timeline,
                                            std::string feature_set = "linguistic-embed") {
    if (emb.dim == 0) {
        throw SchemaError("align_timed_embeddings: zero embedding dimension");
    }
    const auto n = static_cast<Eigen::Index>(timeline.n_segments);
    const auto seg = timeline.segment_ms;
    FeatureMatrix out;
    out.feature_set = std::move(feature_set);
    out.timeline = timeline;
    out.rows = RowMatrixd::Zero(n, emb.dim);
    std::vector<std::size_t> counts(timeline.n_segments, 0);
    for (std::size_t i = 0; i < emb.items.size(); ++i) {
        const auto& item = emb.items[i];
        if (item.vector.size() != emb.dim) {
            throw SchemaError("align_timed_embeddings: item " + std::to_string(i) + " has D=" +
                              std::to_string(item.vector.size()) + ", expected " + std::to_string(emb.dim));
        }
        if (item.end_ms <= item.start_ms) {
            throw SchemaError("align_timed_embeddings: item " + std::to_string(i) + " has an empty span");
        }
        const auto first = static_cast<Eigen::Index>(item.start_ms / seg);
        // Half-open span: an item ending exactly on a boundary stays out of
        // the next segment.
        const auto last = static_cast<Eigen::Index>((static_cast<std::int64_t>(item.end_ms) - 1) / seg);
        const Eigen::Map<const Eigen::RowVectorXf> v(item.vector.data(), emb.dim);
        for (auto t = first; t <= last && t < n; ++t) {
            out.rows.row(t) += v.cast<double>();
            ++counts[static_cast<std::size_t>(t)];
        }
    }
    for (Eigen::Index t = 0; t < n; ++t) {
        if (counts[static_cast<std::size_t>(t)] > 1) {
            out.rows.row(t) /= static_cast<double>(counts[static_cast<std::size_t>(t)]);
        }
    }
    return out;
}

/// Row t is the mean of the frames whose start time falls in segment t.
/// Segments without frames copy the previous row (leading ones the first
/// populated row).
inline FeatureMatrix average_frames_to_segments(const EmbeddingFrames& frames, const SegmentTimeline& timeline,
                                                std::string feature_set = "acoustic-embed") {
    if (frames.n_frames() == 0 || frames.dim() == 0) {
        throw InvalidArgument("average_frames_to_segments: empty embedding matrix");
    }
    const auto n = static_cast<Eigen::Index>(timeline.n_segments);
    FeatureMatrix out;
    out.feature_set = std::move(feature_set);
    out.timeline = timeline;
    out.rows = RowMatrixd::Zero(n, frames.vectors.cols());
    std::vector<std::size_t> counts(timeline.n_segments, 0);
    for (Eigen::Index i = 0; i < frames.vectors.rows(); ++i) {
        const double start = frames.start_offset_ms + static_cast<double>(i) * frames.frame_period_ms;
        const auto t = timeline.segment_of(start);
        if (t < timeline.n_segments) {
            out.rows.row(static_cast<Eigen::Index>(t)) += frames.vectors.row(i).cast<double>();
            ++counts[t];
        }
    }
    std::size_t first = timeline.n_segments;
    for (std::size_t t = 0; t < timeline.n_segments; ++t) {
        if (counts[t] > 0) {
            out.rows.row(static_cast<Eigen::Index>(t)) /= static_cast<double>(counts[t]);
            first = std::min(first, t);
        }
    }
    if (first == timeline.n_segments) {
        throw InvalidArgument("average_frames_to_segments: no frame falls inside the timeline");
    }
    for (std::size_t t = 0; t < timeline.n_segments; ++t) {
        if (counts[t] == 0) {
            const auto src = t < first ? first : t - 1;
            out.rows.row(static_cast<Eigen::Index>(t)) = out.rows.row(static_cast<Eigen::Index>(src));
        }
    }
    return out;
}

// --- interchange files -----------------------------------------------------

inline std::string encode_embedding_frames(const EmbeddingFrames& f) {
    ByteWriter w;
    w.put_bytes("EMB1");
    w.put_u32(static_cast<std::uint32_t>(f.dim()));
    w.put_u32(static_cast<std::uint32_t>(f.n_frames()));
    w.put_f64(f.frame_period_ms);
    w.put_f64(f.start_offset_ms);
    for (Eigen::Index i = 0; i < f.vectors.rows(); ++i) {
        for (Eigen::Index d = 0; d < f.vectors.cols(); ++d) {
            w.put_f32(f.vectors(i, d));
        }
    }
    return w.bytes();
}

inline std::string encode_timed_embeddings(const TimedEmbeddings& e) {
    ByteWriter w;
    w.put_bytes("TEMB");
    w.put_u32(e.dim);
    w.put_u32(static_cast<std::uint32_t>(e.items.size()));
    for (const auto& item : e.items) {
        if (item.vector.size() != e.dim) {
            throw SchemaError("encode_timed_embeddings: item dimension disagrees with header");
        }
        w.put_u32(item.start_ms);
        w.put_u32(item.end_ms);
        for (float v : item.vector) {
            w.put_f32(v);
        }
    }
    return w.bytes();
}

using EmbeddingFile = std::variant<EmbeddingFrames, TimedEmbeddings>;

inline EmbeddingFile decode_embedding_file(std::string_view bytes) {
    ByteReader r(bytes);
    const auto magic = r.get_bytes(4, "magic");
    if (magic == "EMB1") {
        const auto dim = r.get_u32("dimension");
        const auto n = r.get_u32("frame count");
        EmbeddingFrames f;
        std::size_t at = r.offset();
        f.frame_period_ms = r.get_f64("frame period");
        if (!std::isfinite(f.frame_period_ms) || f.frame_period_ms <= 0.0) {
            throw FormatError("EMB1 frame period must be positive", at);
        }
        at = r.offset();
        f.start_offset_ms = r.get_f64("start offset");
        if (!std::isfinite(f.start_offset_ms)) {
            throw FormatError("EMB1 start offset is not finite", at);
        }
        if (dim == 0 || n == 0) {
            throw FormatError("EMB1 with zero dimension or zero frames", 4);
        }
        r.require(static_cast<std::size_t>(dim) * n * 4, "EMB1 payload");
        f.vectors.resize(n, dim);
        for (Eigen::Index i = 0; i < f.vectors.rows(); ++i) {
            for (Eigen::Index d = 0; d < f.vectors.cols(); ++d) {
                f.vectors(i, d) = r.get_finite_f32("embedding value");
            }
        }
        if (!r.at_end()) {
            throw FormatError("trailing bytes after EMB1 payload", r.offset());
        }
        return f;
    }
    if (magic == "TEMB") {
        TimedEmbeddings e;
        e.dim = r.get_u32("dimension");
        const auto n = r.get_u32("item count");
        if (e.dim == 0) {
            throw FormatError("TEMB with zero dimension", 4);
        }
        r.require(static_cast<std::size_t>(n) * (8 + 4 * static_cast<std::size_t>(e.dim)), "TEMB payload");
        e.items.resize(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            auto& item = e.items[i];
            const std::size_t at = r.offset();
            item.start_ms = r.get_u32("start_ms");
            item.end_ms = r.get_u32("end_ms");
            if (item.end_ms <= item.start_ms) {
                throw FormatError("TEMB item " + std::to_string(i) + " has end_ms <= start_ms", at);
            }
            if (i > 0 && item.start_ms < e.items[i - 1].start_ms) {
                throw FormatError("TEMB item " + std::to_string(i) + " is not sorted by start time", at);
            }
            item.vector.resize(e.dim);
            for (auto& v : item.vector) {
                v = r.get_finite_f32("embedding value");
            }
        }
        if (!r.at_end()) {
            throw FormatError("trailing bytes after TEMB payload", r.offset());
        }
        return e;
    }
    throw FormatError("unknown embedding file magic '" + std::string(magic) + "'", 0);
}

inline EmbeddingFile read_embedding_file(const std::filesystem::path& path) {
    try {
        return decode_embedding_file(read_file_bytes(path));
    } catch (const FormatError& e) {
        throw e.prefixed(path.string());
    }
}

inline void write_embedding_file(const EmbeddingFile& file, const std::filesystem::path& path) {
    write_file_bytes(path, std::visit(
                               [](const auto& f) -> std::string {
                                   if constexpr (std::is_same_v<std::decay_t<decltype(f)>, EmbeddingFrames>) {
                                       return encode_embedding_frames(f);
                                   } else {
                                       return encode_timed_embeddings(f);
                                   }
                               },
                               file));
}

}  // namespace emoseq
