#pragma once

// "FEA1" feature cache:
//   magic "FEA1" | u32 D | u32 T | f64 segment_ms | T*D f32 row-major |
//   u16 n | n bytes UTF-8 feature_set
// All integers and floats little-endian.

#include <filesystem>
#include <string>

#include "emoseq/binary_io.hpp"
#include "emoseq/core.hpp"

namespace emoseq {

inline std::string encode_feature_cache(const FeatureMatrix& m) {
    if (m.feature_set.size() > 0xFFFF) {
        throw InvalidArgument("feature set name too long");
    }
    ByteWriter w;
    w.put_bytes("FEA1");
    w.put_u32(static_cast<std::uint32_t>(m.dim()));
    w.put_u32(static_cast<std::uint32_t>(m.n_rows()));
    w.put_f64(static_cast<double>(m.timeline.segment_ms));
    for (Eigen::Index t = 0; t < m.rows.rows(); ++t) {
        for (Eigen::Index d = 0; d < m.rows.cols(); ++d) {
            w.put_f32(static_cast<float>(m.rows(t, d)));
        }
    }
    w.put_u16(static_cast<std::uint16_t>(m.feature_set.size()));
    w.put_bytes(m.feature_set);
    return w.bytes();
}

/// The conversation id is not stored in the cache; callers pass it in.
inline FeatureMatrix decode_feature_cache(std::string_view bytes, std::string conversation_id = {}) {
    ByteReader r(bytes);
    if (r.get_bytes(4, "magic") != "FEA1") {
        throw FormatError("not a FEA1 feature cache", 0);
    }
    const auto dim = r.get_u32("dimension");
    const auto n = r.get_u32("row count");
    const std::size_t seg_at = r.offset();
    const double segment_ms = r.get_f64("segment_ms");
    if (!(segment_ms >= 1.0) || segment_ms != std::floor(segment_ms)) {
        throw FormatError("invalid segment_ms", seg_at);
    }
    if (dim == 0 || n == 0) {
        throw FormatError("empty feature matrix", 4);
    }
    r.require(static_cast<std::size_t>(dim) * n * 4, "feature payload");
    FeatureMatrix m;
    m.rows.resize(n, dim);
    for (Eigen::Index t = 0; t < m.rows.rows(); ++t) {
        for (Eigen::Index d = 0; d < m.rows.cols(); ++d) {
            m.rows(t, d) = r.get_finite_f32("feature value");
        }
    }
    const auto len = r.get_u16("feature set length");
    m.feature_set = std::string(r.get_bytes(len, "feature set name"));
    if (!r.at_end()) {
        throw FormatError("trailing bytes after feature cache", r.offset());
    }
    m.timeline.conversation_id = std::move(conversation_id);
    m.timeline.segment_ms = static_cast<std::int64_t>(segment_ms);
    m.timeline.n_segments = n;
    return m;
}

inline void write_feature_cache(const FeatureMatrix& m, const std::filesystem::path& path) {
    write_file_bytes(path, encode_feature_cache(m));
}

inline FeatureMatrix read_feature_cache(const std::filesystem::path& path, std::string conversation_id = {}) {
    try {
        return decode_feature_cache(read_file_bytes(path), std::move(conversation_id));
    } catch (const FormatError& e) {
        throw e.prefixed(path.string());
    }
}

}  // namespace emoseq
