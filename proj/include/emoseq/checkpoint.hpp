#pragma once

// "SERM" checkpoint:
//   magic "SERM" | u32 version | u32 n | n bytes canonical JSON |
//   u32 parameter count | f32 parameters in layout order | u32 CRC-32
// The CRC covers every preceding byte. All fields little-endian.
//
// The JSON document holds the model configuration plus the metadata needed
// to apply the model to new data (feature set, target dimension and the
// input normalization fitted on the training subset).

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "emoseq/binary_io.hpp"
#include "emoseq/core.hpp"
#include "emoseq/model.hpp"

namespace emoseq {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    std::string feature_set;
    std::string dimension;
    std::optional<NormStats> norm;
};

struct Checkpoint {
    ModelParams<float> params;
    CheckpointMeta meta;
};

inline nlohmann::json config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["input_dim"] = c.input_dim;
    j["reducer_dim"] = c.reducer_dim ? nlohmann::json(*c.reducer_dim) : nlohmann::json(nullptr);
    j["layer_units"] = c.layer_units;
    j["output_tanh"] = c.output_tanh;
    j["seed"] = c.seed;
    return j;
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    if (!j.at("reducer_dim").is_null()) {
        c.reducer_dim = j.at("reducer_dim").get<std::size_t>();
    }
    c.layer_units = j.at("layer_units").get<std::vector<std::size_t>>();
    c.output_tanh = j.at("output_tanh").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

inline nlohmann::json norm_to_json(const NormStats& n) {
    return {{"feature_set", n.feature_set},
            {"mean", std::vector<double>(n.mean.data(), n.mean.data() + n.mean.size())},
            {"std", std::vector<double>(n.std.data(), n.std.data() + n.std.size())}};
}

inline NormStats norm_from_json(const nlohmann::json& j) {
    NormStats n;
    n.feature_set = j.at("feature_set").get<std::string>();
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto sd = j.at("std").get<std::vector<double>>();
    if (mean.size() != sd.size()) {
        throw SchemaError("normalization statistics have mismatched lengths");
    }
    n.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    n.std = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    return n;
}

inline std::string encode_checkpoint(const ModelParams<float>& params, const CheckpointMeta& meta) {
    nlohmann::json doc;
    doc["model"] = config_to_json(params.config);
    doc["feature_set"] = meta.feature_set;
    doc["dimension"] = meta.dimension;
    doc["normalization"] = meta.norm ? norm_to_json(*meta.norm) : nlohmann::json(nullptr);
    const std::string json = doc.dump();

    ByteWriter w;
    w.put_bytes("SERM");
    w.put_u32(kCheckpointVersion);
    w.put_u32(static_cast<std::uint32_t>(json.size()));
    w.put_bytes(json);
    w.put_u32(static_cast<std::uint32_t>(params.values.size()));
    for (float v : params.values) {
        w.put_f32(v);
    }
    w.put_u32(crc32(w.bytes()));
    return w.bytes();
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
    ByteReader r(bytes);
    if (r.get_bytes(4, "magic") != "SERM") {
        throw FormatError("not a SERM checkpoint", 0);
    }
    const auto version = r.get_u32("version");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
    }
    const auto json_len = r.get_u32("config length");
    const std::size_t json_at = r.offset();
    const auto json = r.get_bytes(json_len, "config");
    ModelConfig cfg;
    CheckpointMeta meta;
    try {
        const auto doc = nlohmann::json::parse(json);
        cfg = config_from_json(doc.at("model"));
        meta.feature_set = doc.at("feature_set").get<std::string>();
        meta.dimension = doc.at("dimension").get<std::string>();
        if (!doc.at("normalization").is_null()) {
            meta.norm = norm_from_json(doc.at("normalization"));
            if (meta.norm->dim() != cfg.input_dim) {
                throw SchemaError("normalization dimension disagrees with input_dim");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid checkpoint config: ") + e.what(), json_at);
    } catch (const Error& e) {
        throw FormatError(std::string("invalid checkpoint config: ") + e.what(), json_at);
    }
    ModelParams<float> params(cfg);
    const std::size_t count_at = r.offset();
    const auto count = r.get_u32("parameter count");
    if (count != params.values.size()) {
        throw FormatError("checkpoint holds " + std::to_string(count) + " parameters but its configuration needs " +
                              std::to_string(params.values.size()),
                          count_at);
    }
    for (auto& v : params.values) {
        v = r.get_finite_f32("parameter");
    }
    const std::size_t crc_at = r.offset();
    const auto stored = r.get_u32("checksum");
    if (stored != crc32(bytes.substr(0, crc_at))) {
        throw FormatError("checksum mismatch", crc_at);
    }
    if (!r.at_end()) {
        throw FormatError("trailing bytes after checkpoint", r.offset());
    }
    return Checkpoint{std::move(params), std::move(meta)};
}

inline void save_checkpoint(const ModelParams<float>& params, const CheckpointMeta& meta,
                            const std::filesystem::path& path) {
    write_file_bytes(path, encode_checkpoint(params, meta));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(read_file_bytes(path));
    } catch (const FormatError& e) {
        throw e.prefixed(path.string());
    }
}

/// Loads a checkpoint that must match `expected` in architecture.
inline Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
    auto ck = load_checkpoint(path);
    if (!ck.params.config.same_architecture(expected)) {
        throw SchemaError(path.string() + ": checkpoint configuration " + config_to_json(ck.params.config).dump() +
                          " does not match the requested " + config_to_json(expected).dump());
    }
    return ck;
}

}  // namespace emoseq
