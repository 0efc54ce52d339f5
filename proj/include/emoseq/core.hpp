#pragma once

// Shared data model: the emotional-segment timeline, annotation tracks,
// per-segment feature matrices and input normalization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "emoseq/error.hpp"

namespace emoseq {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixd = RowMatrix<double>;
using RowMatrixf = RowMatrix<float>;

namespace detail {

/// SplitMix64 finalizer: a stateless hash of a counter.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Fixed-duration annotation grid of one conversation. Segment t covers
/// [t * segment_ms, (t + 1) * segment_ms).
struct SegmentTimeline {
    std::string conversation_id;
    std::int64_t segment_ms = 250;
    std::size_t n_segments = 0;

    double start_ms(std::size_t t) const { return static_cast<double>(t) * segment_ms; }
    double end_ms(std::size_t t) const { return static_cast<double>(t + 1) * segment_ms; }
    double span_ms() const { return end_ms(n_segments - 1); }

    /// Segment containing time `ms`; may be >= n_segments past the end.
    std::size_t segment_of(double ms) const {
        if (ms <= 0.0) {
            return 0;
        }
        // The epsilon keeps frame starts computed as i * hop on the boundary
        // they were meant to hit.
        return static_cast<std::size_t>(std::floor(ms / static_cast<double>(segment_ms) + 1e-9));
    }

    bool operator==(const SegmentTimeline&) const = default;
};

/// Number of segments is ceil(duration / segment): the trailing partial
/// segment is kept.
inline SegmentTimeline build_timeline(std::int64_t audio_duration_ms, std::int64_t segment_ms,
                                      std::string conversation_id = {}) {
    if (audio_duration_ms < 1) {
        throw InvalidArgument("audio duration must be positive, got " +
                              std::to_string(audio_duration_ms) + " ms");
    }
    if (segment_ms < 1) {
        throw InvalidArgument("segment duration must be positive, got " +
                              std::to_string(segment_ms) + " ms");
    }
    SegmentTimeline tl;
    tl.conversation_id = std::move(conversation_id);
    tl.segment_ms = segment_ms;
    tl.n_segments = static_cast<std::size_t>((audio_duration_ms + segment_ms - 1) / segment_ms);
    return tl;
}

/// Word (or sub-word) with its time span in the conversation.
struct TimedWord {
    std::string token;
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;

    bool operator==(const TimedWord&) const = default;
};

struct AnnotationTrack {
    std::string annotator_id;
    std::string dimension;
    std::vector<double> values;
};

struct GoldTrack {
    std::string dimension;
    std::vector<double> values;
};

/// Element-wise mean over annotators.
inline GoldTrack merge_annotations(std::span<const AnnotationTrack> tracks) {
    if (tracks.empty()) {
        throw InvalidArgument("merge_annotations: no annotation tracks");
    }
    const auto& first = tracks.front();
    for (const auto& tr : tracks) {
        if (tr.dimension != first.dimension) {
            throw SchemaError("annotator '" + tr.annotator_id + "' rates dimension '" +
                              tr.dimension + "', expected '" + first.dimension + "'");
        }
        if (tr.values.size() != first.values.size()) {
            throw SchemaError("annotator '" + tr.annotator_id + "' has " +
                              std::to_string(tr.values.size()) + " values, expected " +
                              std::to_string(first.values.size()));
        }
        for (double v : tr.values) {
            if (!std::isfinite(v)) {
                throw SchemaError("annotator '" + tr.annotator_id + "' has a non-finite value");
            }
        }
    }
    GoldTrack gold;
    gold.dimension = first.dimension;
    gold.values.assign(first.values.size(), 0.0);
    for (std::size_t t = 0; t < gold.values.size(); ++t) {
        // Sorted summation keeps the result independent of annotator order.
        std::vector<double> column;
        column.reserve(tracks.size());
        for (const auto& tr : tracks) {
            column.push_back(tr.values[t]);
        }
        std::sort(column.begin(), column.end());
        double sum = 0.0;
        for (double v : column) {
            sum += v;
        }
        gold.values[t] = sum / static_cast<double>(tracks.size());
    }
    return gold;
}

/// T x D per-segment features of one conversation.
struct FeatureMatrix {
    std::string feature_set;
    RowMatrixd rows;
    SegmentTimeline timeline;

    std::size_t n_rows() const { return static_cast<std::size_t>(rows.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(rows.cols()); }

    void validate() const {
        if (n_rows() != timeline.n_segments) {
            throw SchemaError("feature set '" + feature_set + "' for '" + timeline.conversation_id +
                              "' has " + std::to_string(n_rows()) + " rows for " +
                              std::to_string(timeline.n_segments) + " segments");
        }
        if (dim() == 0) {
            throw SchemaError("feature set '" + feature_set + "' has zero columns");
        }
        if (!rows.allFinite()) {
            throw SchemaError("feature set '" + feature_set + "' for '" + timeline.conversation_id +
                              "' contains non-finite entries");
        }
    }
};

inline constexpr double kStdFloor = 1e-8;

struct NormStats {
    std::string feature_set;
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

/// Per-dimension mean and population standard deviation pooled over every
/// row of every matrix, with the deviation floored at kStdFloor.
inline NormStats fit_norm_stats(std::span<const FeatureMatrix> train) {
    if (train.empty()) {
        throw InvalidArgument("fit_norm_stats: no training matrices");
    }
    const std::size_t dim = train.front().dim();
    const std::string& fs = train.front().feature_set;
    std::size_t count = 0;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (const auto& m : train) {
        if (m.dim() != dim) {
            throw SchemaError("fit_norm_stats: '" + m.timeline.conversation_id + "' has D=" +
                              std::to_string(m.dim()) + ", expected " + std::to_string(dim));
        }
        if (m.feature_set != fs) {
            throw SchemaError("fit_norm_stats: mixed feature sets '" + fs + "' and '" +
                              m.feature_set + "'");
        }
        sum += m.rows.colwise().sum().transpose();
        count += m.n_rows();
    }
    if (count == 0) {
        throw InvalidArgument("fit_norm_stats: training matrices have no rows");
    }
    NormStats stats;
    stats.feature_set = fs;
    stats.mean = sum / static_cast<double>(count);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (const auto& m : train) {
        sq += (m.rows.rowwise() - stats.mean.transpose()).array().square().colwise().sum().matrix().transpose();
    }
    stats.std = (sq / static_cast<double>(count)).array().sqrt().max(kStdFloor).matrix();
    return stats;
}

inline FeatureMatrix apply_norm(const FeatureMatrix& features, const NormStats& stats) {
    if (features.dim() != stats.dim()) {
        throw SchemaError("apply_norm: features have D=" + std::to_string(features.dim()) +
                          " but statistics have D=" + std::to_string(stats.dim()));
    }
    FeatureMatrix out;
    out.feature_set = features.feature_set;
    out.timeline = features.timeline;
    out.rows = ((features.rows.rowwise() - stats.mean.transpose()).array().rowwise() /
                stats.std.transpose().array())
                   .matrix();
    return out;
}

}  // namespace emoseq
