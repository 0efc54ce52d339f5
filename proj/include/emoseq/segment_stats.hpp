#pragma once

// Per-emotional-segment summaries of frame-level acoustic descriptors, LLD
// CSV ingestion and the speaker-presence flag.

#include <algorithm>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "emoseq/core.hpp"
#include "emoseq/csv.hpp"
#include "emoseq/mfcc.hpp"

namespace emoseq {

namespace detail {

/// Fills rows that received no frames. A gap copies the row before it; gaps
/// at the very start copy the first populated row.
inline void fill_empty_rows(RowMatrixd& rows, const std::vector<std::size_t>& counts) {
    const auto n = counts.size();
    std::size_t first = n;
    for (std::size_t t = 0; t < n; ++t) {
        if (counts[t] > 0) {
            first = t;
            break;
        }
    }
    if (first == n) {
        return;
    }
    for (std::size_t t = 0; t < first; ++t) {
        rows.row(static_cast<Eigen::Index>(t)) = rows.row(static_cast<Eigen::Index>(first));
    }
    for (std::size_t t = first + 1; t < n; ++t) {
        if (counts[t] == 0) {
            rows.row(static_cast<Eigen::Index>(t)) = rows.row(static_cast<Eigen::Index>(t - 1));
        }
    }
}

}  // namespace detail

/// Mean and population standard deviation of the rows assigned to each
/// segment by their start time; D = 2C with means first. Rows starting past
/// the end of the timeline are ignored.
inline FeatureMatrix summarize_timed_rows(std::span<const double> start_ms, const RowMatrixd& values,
                                          const SegmentTimeline& timeline, std::string feature_set) {
    if (values.rows() == 0) {
        throw InvalidArgument("summarize_segments: no frames to summarize");
    }
    const auto n = timeline.n_segments;
    const auto c = values.cols();
    std::vector<std::vector<Eigen::Index>> members(n);
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        const auto seg = timeline.segment_of(start_ms[static_cast<std::size_t>(i)]);
        if (seg < n) {
            members[seg].push_back(i);
        }
    }
    FeatureMatrix out;
    out.feature_set = std::move(feature_set);
    out.timeline = timeline;
    out.rows = RowMatrixd::Zero(static_cast<Eigen::Index>(n), 2 * c);
    std::vector<std::size_t> counts(n);
    for (std::size_t t = 0; t < n; ++t) {
        const auto& idx = members[t];
        counts[t] = idx.size();
        if (idx.empty()) {
            continue;
        }
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(c);
        for (auto i : idx) {
            mean += values.row(i);
        }
        mean /= static_cast<double>(idx.size());
        Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(c);
        for (auto i : idx) {
            var += (values.row(i) - mean).array().square().matrix();
        }
        var /= static_cast<double>(idx.size());
        out.rows.row(static_cast<Eigen::Index>(t)).head(c) = mean;
        out.rows.row(static_cast<Eigen::Index>(t)).tail(c) = var.array().sqrt().matrix();
    }
    if (std::all_of(counts.begin(), counts.end(), [](auto k) { return k == 0; })) {
        throw InvalidArgument("summarize_segments: no frame falls inside the timeline");
    }
    detail::fill_empty_rows(out.rows, counts);
    return out;
}

inline FeatureMatrix summarize_segments(const FrameMatrix& frames, const SegmentTimeline& timeline,
                                        std::string feature_set = "mfcc-stats") {
    std::vector<double> starts(frames.n_frames());
    for (std::size_t i = 0; i < starts.size(); ++i) {
        starts[i] = static_cast<double>(i) * frames.hop_ms;
    }
    return summarize_timed_rows(starts, frames.frames, timeline, std::move(feature_set));
}

/// Frame-level LLD table: header "time_ms,v1,...,vK", rows sorted by time.
/// Summarized per segment into 2K columns.
inline FeatureMatrix parse_lld_csv(std::string_view text, const std::string& source,
                                   const SegmentTimeline& timeline,
                                   std::string feature_set = "egemaps-stats") {
    const auto table = csv::parse_table(text, source);
    if (table.header.size() < 2 || table.header.front() != "time_ms") {
        throw SchemaError(source + ": header must start with 'time_ms' followed by descriptor columns");
    }
    if (table.rows.empty()) {
        throw SchemaError(source + ": no descriptor rows");
    }
    const auto k = static_cast<Eigen::Index>(table.header.size() - 1);
    RowMatrixd values(static_cast<Eigen::Index>(table.rows.size()), k);
    std::vector<double> times(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (r > 0 && row[0] < times[r - 1]) {
            throw SchemaError(source + ": row " + std::to_string(table.line_numbers[r]) +
                              " is earlier than the previous row");
        }
        for (double v : row) {
            if (!std::isfinite(v)) {
                throw SchemaError(source + ": row " + std::to_string(table.line_numbers[r]) +
                                  " has a non-finite value");
            }
        }
        times[r] = row[0];
        for (Eigen::Index c = 0; c < k; ++c) {
            values(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c + 1)];
        }
    }
    return summarize_timed_rows(times, values, timeline, std::move(feature_set));
}

inline FeatureMatrix ingest_lld_csv(const std::filesystem::path& path, const SegmentTimeline& timeline,
                                    std::string feature_set = "egemaps-stats") {
    return parse_lld_csv(read_file_bytes(path), path.string(), timeline, std::move(feature_set));
}

/// Intervals [start_ms, end_ms) during which the target speaker talks.
struct SpeakerTurns {
    std::vector<std::pair<std::int64_t, std::int64_t>> intervals;

    void validate() const {
        for (std::size_t i = 0; i < intervals.size(); ++i) {
            const auto [s, e] = intervals[i];
            if (e <= s) {
                throw InvalidArgument("speaker turn " + std::to_string(i) + " is empty or reversed");
            }
            if (i > 0 && s < intervals[i - 1].second) {
                throw InvalidArgument("speaker turn " + std::to_string(i) +
                                      " overlaps or precedes the previous turn");
            }
        }
    }
};

/// Turns covering the union of word spans; words closer than `max_gap_ms`
/// join the same turn.
inline SpeakerTurns turns_from_words(std::span<const TimedWord> words, std::int64_t max_gap_ms = 0) {
    SpeakerTurns turns;
    for (const auto& w : words) {
        if (!turns.intervals.empty() && w.start_ms <= turns.intervals.back().second + max_gap_ms) {
            turns.intervals.back().second = std::max(turns.intervals.back().second, w.end_ms);
        } else {
            turns.intervals.emplace_back(w.start_ms, w.end_ms);
        }
    }
    return turns;
}

/// Appends a column that is 1 where the speaker is active for at least half
/// of the segment and 0 elsewhere.
inline FeatureMatrix append_speaker_flag(const FeatureMatrix& features, const SpeakerTurns& turns) {
    turns.validate();
    const auto& tl = features.timeline;
    FeatureMatrix out;
    out.feature_set = features.feature_set;
    out.timeline = tl;
    out.rows.resize(features.rows.rows(), features.rows.cols() + 1);
    out.rows.leftCols(features.rows.cols()) = features.rows;
    std::size_t k = 0;
    for (Eigen::Index t = 0; t < features.rows.rows(); ++t) {
        const auto seg_start = static_cast<std::int64_t>(t) * tl.segment_ms;
        const auto seg_end = seg_start + tl.segment_ms;
        while (k < turns.intervals.size() && turns.intervals[k].second <= seg_start) {
            ++k;
        }
        std::int64_t covered = 0;
        for (std::size_t j = k; j < turns.intervals.size() && turns.intervals[j].first < seg_end; ++j) {
            covered += std::min(seg_end, turns.intervals[j].second) -
                       std::max(seg_start, turns.intervals[j].first);
        }
        out.rows(t, features.rows.cols()) = 2 * covered >= tl.segment_ms ? 1.0 : 0.0;
    }
    return out;
}

}  // namespace emoseq
