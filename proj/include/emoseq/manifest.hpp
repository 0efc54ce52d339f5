#pragma once

// Dataset manifest plus the annotation and transcript file formats it
// references.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoseq/binary_io.hpp"
#include "emoseq/core.hpp"
#include "emoseq/csv.hpp"

namespace emoseq {

namespace fs = std::filesystem;

enum class Subset { train, dev, test };

inline std::string to_string(Subset s) {
    switch (s) {
        case Subset::train: return "train";
        case Subset::dev: return "dev";
        case Subset::test: return "test";
    }
    return "?";
}

inline Subset parse_subset(const std::string& s) {
    if (s == "train") return Subset::train;
    if (s == "dev") return Subset::dev;
    if (s == "test") return Subset::test;
    throw InvalidArgument("unknown subset '" + s + "' (expected train, dev or test)");
}

/// One conversation record. Paths are stored as written in the manifest;
/// relative paths resolve against the manifest's directory.
struct ConversationRecord {
    std::string id;
    std::string audio;
    std::optional<std::string> transcript;
    std::vector<std::string> annotations;
    std::map<std::string, std::string> embeddings;
    Subset subset = Subset::train;
    std::int64_t segment_ms = 250;
};

struct DatasetManifest {
    fs::path base_dir;
    std::vector<ConversationRecord> conversations;

    fs::path resolve(const std::string& p) const {
        fs::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    }

    std::vector<const ConversationRecord*> subset(Subset s) const {
        std::vector<const ConversationRecord*> out;
        for (const auto& c : conversations) {
            if (c.subset == s) {
                out.push_back(&c);
            }
        }
        return out;
    }

    const ConversationRecord* find(const std::string& id) const {
        for (const auto& c : conversations) {
            if (c.id == id) {
                return &c;
            }
        }
        return nullptr;
    }

    /// Every missing referenced file, as "id: path" strings.
    std::vector<std::string> missing_paths() const {
        std::vector<std::string> out;
        auto check = [&](const ConversationRecord& c, const std::string& p) {
            if (!fs::exists(resolve(p))) {
                out.push_back(c.id + ": " + resolve(p).string());
            }
        };
        for (const auto& c : conversations) {
            check(c, c.audio);
            if (c.transcript) {
                check(c, *c.transcript);
            }
            for (const auto& a : c.annotations) {
                check(c, a);
            }
            for (const auto& [name, p] : c.embeddings) {
                check(c, p);
            }
        }
        return out;
    }
};

inline nlohmann::json to_json(const DatasetManifest& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : m.conversations) {
        nlohmann::json rec;
        rec["id"] = c.id;
        rec["audio"] = c.audio;
        rec["transcript"] = c.transcript ? nlohmann::json(*c.transcript) : nlohmann::json(nullptr);
        rec["annotations"] = c.annotations;
        rec["embeddings"] = nlohmann::json::object();
        for (const auto& [k, v] : c.embeddings) {
            rec["embeddings"][k] = v;
        }
        rec["subset"] = to_string(c.subset);
        rec["segment_ms"] = c.segment_ms;
        arr.push_back(std::move(rec));
    }
    return arr;
}

inline DatasetManifest parse_manifest(const nlohmann::json& doc, fs::path base_dir) {
    static const std::set<std::string> kFields = {"id",         "audio",  "transcript", "annotations",
                                                  "embeddings", "subset", "segment_ms"};
    if (!doc.is_array()) {
        throw SchemaError("manifest: top level must be an array of conversation records");
    }
    DatasetManifest m;
    m.base_dir = std::move(base_dir);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& rec = doc[i];
        const std::string where = "manifest record " + std::to_string(i);
        if (!rec.is_object()) {
            throw SchemaError(where + ": not an object");
        }
        for (const auto& [key, _] : rec.items()) {
            if (!kFields.count(key)) {
                throw SchemaError(where + ": unknown field '" + key + "'");
            }
        }
        for (const auto& key : kFields) {
            if (!rec.contains(key)) {
                throw SchemaError(where + ": missing field '" + key + "'");
            }
        }
        try {
            ConversationRecord c;
            c.id = rec.at("id").get<std::string>();
            c.audio = rec.at("audio").get<std::string>();
            if (!rec.at("transcript").is_null()) {
                c.transcript = rec.at("transcript").get<std::string>();
            }
            c.annotations = rec.at("annotations").get<std::vector<std::string>>();
            c.embeddings = rec.at("embeddings").get<std::map<std::string, std::string>>();
            c.subset = parse_subset(rec.at("subset").get<std::string>());
            c.segment_ms = rec.at("segment_ms").get<std::int64_t>();
            if (c.id.empty()) {
                throw SchemaError("empty id");
            }
            if (c.annotations.empty()) {
                throw SchemaError("'" + c.id + "' lists no annotation files");
            }
            if (c.segment_ms < 1) {
                throw SchemaError("'" + c.id + "' has non-positive segment_ms");
            }
            if (!ids.insert(c.id).second) {
                throw SchemaError("duplicate conversation id '" + c.id + "'");
            }
            m.conversations.push_back(std::move(c));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(where + ": " + e.what());
        } catch (const Error& e) {
            throw SchemaError(where + ": " + e.what());
        }
    }
    return m;
}

/// Parses and structurally validates a manifest. File existence is checked
/// separately through missing_paths() so callers can report per conversation.
inline DatasetManifest load_manifest(const fs::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("manifest " + path.string() + ": " + e.what());
    }
    return parse_manifest(doc, path.parent_path());
}

inline void save_manifest(const DatasetManifest& m, const fs::path& path) {
    write_file_bytes(path, to_json(m).dump(2) + "\n");
}

// --- annotation tracks: "segment_index,value" ------------------------------

inline std::vector<double> parse_annotation_csv(std::string_view text, const std::string& source) {
    auto table = csv::parse_table(text, source);
    if (table.header != std::vector<std::string>{"segment_index", "value"}) {
        throw SchemaError(source + ": header must be 'segment_index,value'");
    }
    std::vector<double> values;
    values.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (row[0] != static_cast<double>(i)) {
            throw SchemaError(source + ": row " + std::to_string(table.line_numbers[i]) +
                              " has segment_index " + csv::format_double(row[0]) + ", expected " +
                              std::to_string(i));
        }
        if (!std::isfinite(row[1])) {
            throw SchemaError(source + ": row " + std::to_string(table.line_numbers[i]) +
                              " has a non-finite value");
        }
        values.push_back(row[1]);
    }
    return values;
}

inline std::vector<double> read_annotation_csv(const fs::path& path) {
    return parse_annotation_csv(read_file_bytes(path), path.string());
}

inline std::string format_annotation_csv(std::span<const double> values) {
    std::string out = "segment_index,value\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += std::to_string(i) + "," + csv::format_double(values[i]) + "\n";
    }
    return out;
}

/// Annotation files of `rec` that belong to `dimension`: those whose file
/// name contains the dimension name. A record whose files never mention the
/// dimension is treated as single-dimension and all its files are used.
inline std::vector<std::string> annotation_paths_for(const ConversationRecord& rec,
                                                     const std::string& dimension) {
    std::vector<std::string> out;
    for (const auto& p : rec.annotations) {
        if (!dimension.empty() &&
            fs::path(p).filename().string().find(dimension) != std::string::npos) {
            out.push_back(p);
        }
    }
    return out.empty() ? rec.annotations : out;
}

inline GoldTrack load_gold(const DatasetManifest& m, const ConversationRecord& rec,
                           const std::string& dimension) {
    std::vector<AnnotationTrack> tracks;
    for (const auto& p : annotation_paths_for(rec, dimension)) {
        AnnotationTrack tr;
        tr.annotator_id = fs::path(p).stem().string();
        tr.dimension = dimension;
        tr.values = read_annotation_csv(m.resolve(p));
        tracks.push_back(std::move(tr));
    }
    return merge_annotations(tracks);
}

// --- transcripts: JSON array of {token, start_ms, end_ms} ------------------

inline std::vector<TimedWord> parse_transcript(const nlohmann::json& doc, const std::string& source) {
    if (!doc.is_array()) {
        throw SchemaError(source + ": transcript must be a JSON array");
    }
    std::vector<TimedWord> words;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        TimedWord w;
        try {
            w.token = doc[i].at("token").get<std::string>();
            w.start_ms = doc[i].at("start_ms").get<std::int64_t>();
            w.end_ms = doc[i].at("end_ms").get<std::int64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(source + ": word " + std::to_string(i) + ": " + e.what());
        }
        if (w.start_ms < 0 || w.end_ms <= w.start_ms) {
            throw SchemaError(source + ": word " + std::to_string(i) + " has an invalid span");
        }
        if (!words.empty()) {
            const auto& prev = words.back();
            if (std::pair(w.start_ms, w.end_ms) < std::pair(prev.start_ms, prev.end_ms)) {
                throw SchemaError(source + ": word " + std::to_string(i) + " is out of order");
            }
        }
        words.push_back(std::move(w));
    }
    return words;
}

inline std::vector<TimedWord> read_transcript(const fs::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return parse_transcript(doc, path.string());
}

inline std::string format_transcript(std::span<const TimedWord> words) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& w : words) {
        arr.push_back({{"token", w.token}, {"start_ms", w.start_ms}, {"end_ms", w.end_ms}});
    }
    return arr.dump() + "\n";
}

}  // namespace emoseq
