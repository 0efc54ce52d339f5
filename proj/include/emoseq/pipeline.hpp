#pragma once

// Workflow commands behind the command-line tool. Each command reads and
// writes only the paths it is given, so runs compose through directories:
//
//   synth   -> <out>/manifest.json and the files it references
//   extract -> <out>/<feature_set>/<id>.fea  (+ <id>.fea.src input digest)
//   train   -> <out>/best.serm, last.serm, history.csv, timing.csv
//   eval    -> <out>/scores_<subset>.csv, <out>/predictions/<id>.csv, eval.json
//   fuse    -> <out>/fusion_report.csv, fusion.json, predictions/<id>.csv
//   plot    -> one SVG file

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoseq/align.hpp"
#include "emoseq/audio.hpp"
#include "emoseq/checkpoint.hpp"
#include "emoseq/core.hpp"
#include "emoseq/csv.hpp"
#include "emoseq/feature_cache.hpp"
#include "emoseq/fusion.hpp"
#include "emoseq/manifest.hpp"
#include "emoseq/metrics.hpp"
#include "emoseq/mfcc.hpp"
#include "emoseq/plot.hpp"
#include "emoseq/segment_stats.hpp"
#include "emoseq/trainer.hpp"

namespace emoseq {

/// Failure attributed to one conversation; keeps the kind of its cause.
class ConversationError : public Error {
public:
    ConversationError(std::string id, const Error& cause)
        : Error(cause.kind(), id + ": " + cause.what()), id_(std::move(id)), detail_(cause.what()) {}

    const std::string& conversation_id() const noexcept { return id_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string id_;
    std::string detail_;
};

// --- feature sets ----------------------------------------------------------

inline constexpr std::string_view kSpeakerSuffix = "+spk";

inline bool has_speaker_flag(const std::string& feature_set) {
    return feature_set.size() > kSpeakerSuffix.size() && feature_set.ends_with(kSpeakerSuffix);
}

inline std::string base_feature_set(const std::string& feature_set) {
    return has_speaker_flag(feature_set) ? feature_set.substr(0, feature_set.size() - kSpeakerSuffix.size())
                                         : feature_set;
}

/// Reducer width used when the run configuration does not set one: none for
/// the summarized baselines, 48 for text embeddings, 40 for other embeddings.
inline std::optional<std::size_t> default_reducer_dim(const std::string& feature_set) {
    const auto base = base_feature_set(feature_set);
    if (base == "mfcc-stats" || base == "egemaps-stats") {
        return std::nullopt;
    }
    if (base.find("linguistic") != std::string::npos || base.find("text") != std::string::npos) {
        return 48;
    }
    return 40;
}

/// Files whose content determines a conversation's features.
inline std::vector<fs::path> extraction_inputs(const DatasetManifest& m, const ConversationRecord& rec,
                                               const std::string& feature_set) {
    std::vector<fs::path> in{m.resolve(rec.audio)};
    const auto base = base_feature_set(feature_set);
    if (base != "mfcc-stats") {
        const auto it = rec.embeddings.find(base);
        if (it == rec.embeddings.end()) {
            throw SchemaError("no '" + base + "' entry in the manifest embeddings");
        }
        in.push_back(m.resolve(it->second));
    }
    if (has_speaker_flag(feature_set)) {
        if (!rec.transcript) {
            throw SchemaError("'" + feature_set + "' needs a transcript for speaker turns");
        }
        in.push_back(m.resolve(*rec.transcript));
    }
    return in;
}

/// Feature matrix of one conversation. The audio length defines the timeline
/// for every feature set.
inline FeatureMatrix compute_features(const DatasetManifest& m, const ConversationRecord& rec,
                                      const std::string& feature_set, const MfccConfig& mfcc = {}) {
    const auto inputs = extraction_inputs(m, rec, feature_set);
    const auto base = base_feature_set(feature_set);
    FeatureMatrix out;
    if (base == "mfcc-stats") {
        const auto audio = read_wav(inputs[0]);
        const auto tl = build_timeline(audio.duration_ms(), rec.segment_ms, rec.id);
        out = summarize_segments(extract_mfcc(audio, mfcc), tl, base);
    } else {
        const auto tl = build_timeline(wav_duration_ms(inputs[0]), rec.segment_ms, rec.id);
        if (base == "egemaps-stats") {
            out = ingest_lld_csv(inputs[1], tl, base);
        } else {
            const auto file = read_embedding_file(inputs[1]);
            if (const auto* frames = std::get_if<EmbeddingFrames>(&file)) {
                out = average_frames_to_segments(*frames, tl, base);
            } else {
                out = align_timed_embeddings(std::get<TimedEmbeddings>(file), tl, base);
            }
        }
    }
    if (has_speaker_flag(feature_set)) {
        const auto words = read_transcript(inputs.back());
        out = append_speaker_flag(out, turns_from_words(words));
        out.feature_set = feature_set;
    }
    out.validate();
    return out;
}

// --- extract ---------------------------------------------------------------

struct ExtractReport {
    std::vector<std::string> written;
    std::vector<std::string> skipped;
    std::vector<std::pair<std::string, Error>> failed;
};

inline fs::path feature_cache_path(const fs::path& features_dir, const std::string& feature_set,
                                   const std::string& id) {
    return features_dir / feature_set / (id + ".fea");
}

/// Digest of the inputs and settings a cache was computed from.
inline std::string input_digest(const std::vector<fs::path>& inputs, const std::string& feature_set,
                                std::int64_t segment_ms, const MfccConfig& mfcc) {
    nlohmann::json d;
    d["feature_set"] = feature_set;
    d["segment_ms"] = segment_ms;
    d["mfcc"] = {mfcc.n_mfcc, mfcc.n_mels, mfcc.hop_ms, mfcc.win_ms, mfcc.log_floor, mfcc.fmin_hz, mfcc.fmax_hz};
    d["inputs"] = nlohmann::json::array();
    for (const auto& p : inputs) {
        const auto bytes = read_file_bytes(p);
        d["inputs"].push_back({{"size", bytes.size()}, {"crc32", crc32(bytes)}});
    }
    return d.dump() + "\n";
}

/// Writes one cache per conversation, skipping those whose recorded input
/// digest still matches. Failures are collected per conversation.
inline ExtractReport cmd_extract(const DatasetManifest& m, const std::string& feature_set,
                                 const fs::path& features_dir, const MfccConfig& mfcc = {}) {
    ExtractReport rep;
    for (const auto& rec : m.conversations) {
        try {
            const auto path = feature_cache_path(features_dir, feature_set, rec.id);
            auto sidecar = path;
            sidecar += ".src";
            const auto digest = input_digest(extraction_inputs(m, rec, feature_set), feature_set, rec.segment_ms, mfcc);
            if (fs::exists(path) && fs::exists(sidecar) && read_file_bytes(sidecar) == digest) {
                rep.skipped.push_back(rec.id);
                continue;
            }
            write_feature_cache(compute_features(m, rec, feature_set, mfcc), path);
            write_file_bytes(sidecar, digest);
            rep.written.push_back(rec.id);
        } catch (const Error& e) {
            rep.failed.emplace_back(rec.id, e);
        } catch (const fs::filesystem_error& e) {
            rep.failed.emplace_back(rec.id, IoError(e.what()));
        }
    }
    return rep;
}

// --- run configuration -----------------------------------------------------

struct RunConfig {
    std::string manifest;
    std::string out;
    std::string features_dir;
    std::string feature_set = "mfcc-stats";
    std::string dimension = "satisfaction";
    std::uint64_t seed = 0;
    std::size_t epochs = 500;
    std::size_t batch_size = 15;
    double learning_rate = 1e-3;
    double clip_norm = 0.0;
    std::vector<std::size_t> layer_units{200, 64, 32, 32};
    /// Unset: default_reducer_dim(feature_set). Set to nullopt: no reducer.
    std::optional<std::optional<std::size_t>> reducer_dim;
    bool output_tanh = false;
    std::string warm_start;

    ModelConfig model_config(std::size_t input_dim) const {
        ModelConfig c;
        c.input_dim = input_dim;
        c.reducer_dim = reducer_dim ? *reducer_dim : default_reducer_dim(feature_set);
        c.layer_units = layer_units;
        c.output_tanh = output_tanh;
        c.seed = seed;
        c.validate();
        return c;
    }

    TrainOptions train_options() const {
        TrainOptions o;
        o.epochs = epochs;
        o.batch_size = batch_size;
        o.learning_rate = learning_rate;
        o.seed = seed;
        o.clip_norm = clip_norm;
        return o;
    }
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["manifest"] = c.manifest;
    j["out"] = c.out;
    j["features_dir"] = c.features_dir;
    j["feature_set"] = c.feature_set;
    j["dimension"] = c.dimension;
    j["seed"] = c.seed;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["clip_norm"] = c.clip_norm;
    j["layer_units"] = c.layer_units;
    if (c.reducer_dim) {
        j["reducer_dim"] = *c.reducer_dim ? nlohmann::json(**c.reducer_dim) : nlohmann::json(nullptr);
    } else {
        j["reducer_dim"] = "auto";
    }
    j["output_tanh"] = c.output_tanh;
    j["warm_start"] = c.warm_start;
    return j;
}

/// Applies the fields present in `j` on top of `base`. Unknown fields are
/// rejected.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {}) {
    static const std::set<std::string> kFields = {
        "manifest",   "out",         "features_dir", "feature_set", "dimension",   "seed",      "epochs",
        "batch_size", "learning_rate", "clip_norm",  "layer_units", "reducer_dim", "output_tanh", "warm_start"};
    if (!j.is_object()) {
        throw SchemaError("run config must be a JSON object");
    }
    for (const auto& [key, _] : j.items()) {
        if (!kFields.count(key)) {
            throw SchemaError("run config: unknown field '" + key + "'");
        }
    }
    try {
        auto get = [&](const char* key, auto& dst) {
            if (j.contains(key)) {
                dst = j.at(key).get<std::decay_t<decltype(dst)>>();
            }
        };
        get("manifest", base.manifest);
        get("out", base.out);
        get("features_dir", base.features_dir);
        get("feature_set", base.feature_set);
        get("dimension", base.dimension);
        get("seed", base.seed);
        get("epochs", base.epochs);
        get("batch_size", base.batch_size);
        get("learning_rate", base.learning_rate);
        get("clip_norm", base.clip_norm);
        get("layer_units", base.layer_units);
        get("output_tanh", base.output_tanh);
        get("warm_start", base.warm_start);
        if (j.contains("reducer_dim")) {
            const auto& r = j.at("reducer_dim");
            if (r.is_null()) {
                base.reducer_dim = std::optional<std::size_t>{};
            } else if (r.is_string()) {
                if (r.get<std::string>() != "auto") {
                    throw SchemaError("run config: reducer_dim must be an integer, null or \"auto\"");
                }
                base.reducer_dim.reset();
            } else {
                base.reducer_dim = std::optional<std::size_t>{r.get<std::size_t>()};
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("run config: ") + e.what());
    }
    return base;
}

inline RunConfig load_run_config(const fs::path& path, RunConfig base = {}) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return run_config_from_json(j, std::move(base));
}

// --- train -----------------------------------------------------------------

inline FeatureMatrix load_cached_features(const fs::path& features_dir, const std::string& feature_set,
                                          const ConversationRecord& rec) {
    const auto path = feature_cache_path(features_dir, feature_set, rec.id);
    if (!fs::exists(path)) {
        throw ConversationError(rec.id, IoError("missing feature cache " + path.string() + " (run extract first)"));
    }
    try {
        auto fm = read_feature_cache(path, rec.id);
        if (fm.feature_set != feature_set) {
            throw SchemaError(path.string() + " holds '" + fm.feature_set + "', expected '" + feature_set + "'");
        }
        if (fm.timeline.segment_ms != rec.segment_ms) {
            throw SchemaError(path.string() + " was computed for " + std::to_string(fm.timeline.segment_ms) +
                              " ms segments, manifest says " + std::to_string(rec.segment_ms));
        }
        return fm;
    } catch (const ConversationError&) {
        throw;
    } catch (const Error& e) {
        throw ConversationError(rec.id, e);
    }
}

inline GoldTrack load_gold_checked(const DatasetManifest& m, const ConversationRecord& rec,
                                   const std::string& dimension, std::size_t n_segments) {
    try {
        auto gold = load_gold(m, rec, dimension);
        if (gold.values.size() != n_segments) {
            throw SchemaError("gold has " + std::to_string(gold.values.size()) + " segments, features have " +
                              std::to_string(n_segments));
        }
        return gold;
    } catch (const Error& e) {
        throw ConversationError(rec.id, e);
    }
}

struct LoadedSubset {
    std::vector<std::string> ids;
    std::vector<FeatureMatrix> features;
    std::vector<GoldTrack> gold;
};

inline LoadedSubset load_subset(const DatasetManifest& m, Subset s, const fs::path& features_dir,
                                const std::string& feature_set, const std::string& dimension) {
    LoadedSubset out;
    for (const auto* rec : m.subset(s)) {
        auto fm = load_cached_features(features_dir, feature_set, *rec);
        out.gold.push_back(load_gold_checked(m, *rec, dimension, fm.n_rows()));
        out.ids.push_back(rec->id);
        out.features.push_back(std::move(fm));
    }
    if (out.ids.empty()) {
        throw InvalidArgument("the " + to_string(s) + " subset of the manifest is empty");
    }
    return out;
}

inline std::vector<Conversation> to_conversations(const LoadedSubset& s, const NormStats& norm) {
    std::vector<Conversation> out;
    for (std::size_t i = 0; i < s.ids.size(); ++i) {
        out.push_back({s.ids[i], apply_norm(s.features[i], norm).rows.cast<float>(), s.gold[i].values});
    }
    return out;
}

inline std::string format_history(const TrainRecord& rec) {
    std::string out = "epoch,train_loss,dev_ccc\n";
    for (const auto& e : rec.epochs) {
        out += std::to_string(e.epoch) + "," + csv::format_double(e.train_loss) + "," + csv::format_double(e.dev_ccc) +
               "\n";
    }
    out += "# best_epoch=" + std::to_string(rec.best_epoch) + " dev_ccc=" + csv::format_double(rec.best_dev_ccc) + "\n";
    return out;
}

inline std::string format_timing(const TrainRecord& rec) {
    std::string out = "epoch,wall_ms\n";
    for (const auto& e : rec.epochs) {
        out += std::to_string(e.epoch) + "," + csv::format_fixed(e.wall_ms, 3) + "\n";
    }
    return out;
}

struct TrainSummary {
    TrainRecord record;
    ModelConfig config;
};

inline TrainSummary cmd_train(const RunConfig& rc, const EpochCallback& on_epoch = {}) {
    if (rc.out.empty()) {
        throw InvalidArgument("train: no output directory");
    }
    const auto m = load_manifest(rc.manifest);
    const fs::path features_dir = rc.features_dir;
    const auto train_s = load_subset(m, Subset::train, features_dir, rc.feature_set, rc.dimension);
    const auto dev_s = load_subset(m, Subset::dev, features_dir, rc.feature_set, rc.dimension);
    const auto norm = fit_norm_stats(train_s.features);
    const auto cfg = rc.model_config(norm.dim());
    for (std::size_t i = 0; i < dev_s.ids.size(); ++i) {
        if (dev_s.features[i].dim() != norm.dim()) {
            throw ConversationError(dev_s.ids[i], SchemaError("feature dimension differs from the train subset"));
        }
    }

    ModelParams<float> init = init_params<float>(cfg);
    if (!rc.warm_start.empty()) {
        auto ck = load_checkpoint(rc.warm_start, cfg);
        if (ck.meta.feature_set != rc.feature_set) {
            throw SchemaError(rc.warm_start + ": checkpoint was trained on '" + ck.meta.feature_set + "', not '" +
                              rc.feature_set + "'");
        }
        init.values = ck.params.values;
    }
    const auto train_c = to_conversations(train_s, norm);
    const auto dev_c = to_conversations(dev_s, norm);
    auto result = train(init, train_c, dev_c, rc.train_options(), on_epoch);

    const fs::path out = rc.out;
    const CheckpointMeta meta{rc.feature_set, rc.dimension, norm};
    save_checkpoint(result.best, meta, out / "best.serm");
    save_checkpoint(result.last, meta, out / "last.serm");
    write_file_bytes(out / "history.csv", format_history(result.record));
    write_file_bytes(out / "timing.csv", format_timing(result.record));
    return {result.record, cfg};
}

// --- eval ------------------------------------------------------------------

inline std::string format_prediction_csv(std::span<const double> values, std::int64_t segment_ms) {
    std::string out = "segment_index,time_ms,value\n";
    for (std::size_t t = 0; t < values.size(); ++t) {
        out += std::to_string(t) + "," + std::to_string(static_cast<std::int64_t>(t) * segment_ms) + "," +
               csv::format_double(values[t]) + "\n";
    }
    return out;
}

/// Values of a CSV with a "value" column (prediction or annotation files).
inline std::vector<double> read_value_csv(const fs::path& path) {
    const auto table = csv::read_table(path);
    const auto it = std::find(table.header.begin(), table.header.end(), "value");
    if (it == table.header.end()) {
        throw SchemaError(path.string() + ": no 'value' column");
    }
    const auto col = static_cast<std::size_t>(it - table.header.begin());
    std::vector<double> v;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (table.rows[i][0] != static_cast<double>(i)) {
            throw SchemaError(path.string() + ": row " + std::to_string(table.line_numbers[i]) +
                              " is out of sequence");
        }
        v.push_back(table.rows[i][col]);
    }
    return v;
}

struct EvalSummary {
    ScoreReport report;
    std::vector<PredictionTrack> predictions;
};

inline EvalSummary cmd_eval(const fs::path& checkpoint, const DatasetManifest& m, Subset subset,
                            const fs::path& features_dir, const fs::path& out) {
    const auto ck = load_checkpoint(checkpoint);
    if (!ck.meta.norm) {
        throw SchemaError(checkpoint.string() + ": checkpoint carries no input normalization");
    }
    const auto data = load_subset(m, subset, features_dir, ck.meta.feature_set, ck.meta.dimension);
    EvalSummary res;
    std::vector<std::vector<double>> preds, golds;
    for (std::size_t i = 0; i < data.ids.size(); ++i) {
        const auto& fm = data.features[i];
        if (fm.dim() != ck.params.config.input_dim) {
            throw ConversationError(data.ids[i], SchemaError("feature dimension " + std::to_string(fm.dim()) +
                                                             " does not match the checkpoint"));
        }
        const RowMatrixf x = apply_norm(fm, *ck.meta.norm).rows.cast<float>();
        auto y = predict(ck.params, x);
        write_file_bytes(out / "predictions" / (data.ids[i] + ".csv"),
                         format_prediction_csv(y, fm.timeline.segment_ms));
        res.predictions.push_back({data.ids[i], y, ck.meta.feature_set});
        preds.push_back(std::move(y));
        golds.push_back(data.gold[i].values);
    }
    res.report = score_subset(ck.meta.dimension, data.ids, preds, golds);
    write_file_bytes(out / ("scores_" + to_string(subset) + ".csv"), format_score_report(res.report));
    nlohmann::json info{{"feature_set", ck.meta.feature_set}, {"dimension", ck.meta.dimension}};
    write_file_bytes(out / "eval.json", info.dump(2) + "\n");
    return res;
}

// --- fuse ------------------------------------------------------------------

/// Source name of a prediction directory written by cmd_eval.
inline std::string prediction_source(const fs::path& dir) {
    const auto info = dir / "eval.json";
    if (fs::exists(info)) {
        try {
            return nlohmann::json::parse(read_file_bytes(info)).at("feature_set").get<std::string>();
        } catch (const nlohmann::json::exception&) {
        }
    }
    return dir.filename().string();
}

inline std::map<std::string, PredictionTrack> read_prediction_dir(const fs::path& dir) {
    std::map<std::string, PredictionTrack> out;
    const auto pred_dir = dir / "predictions";
    if (!fs::is_directory(pred_dir)) {
        throw IoError("no predictions directory in " + dir.string());
    }
    const auto source = prediction_source(dir);
    for (const auto& entry : fs::directory_iterator(pred_dir)) {
        if (entry.path().extension() == ".csv") {
            const auto id = entry.path().stem().string();
            out[id] = PredictionTrack{id, read_value_csv(entry.path()), source};
        }
    }
    return out;
}

struct FuseSummary {
    FusionSearch search;
    std::vector<std::string> fused_ids;
};

/// Picks the weight on the dev subset, then writes fused predictions for
/// every conversation present in both directories.
inline FuseSummary cmd_fuse(const fs::path& preds_a, const fs::path& preds_b, const DatasetManifest& m,
                            const std::string& dimension, const fs::path& out, const WeightGrid& grid = {}) {
    const auto a = read_prediction_dir(preds_a);
    const auto b = read_prediction_dir(preds_b);
    std::map<std::string, std::vector<double>> gold;
    std::vector<PredictionTrack> dev_a, dev_b;
    std::vector<std::string> missing;
    for (const auto* rec : m.subset(Subset::dev)) {
        const auto ia = a.find(rec->id);
        const auto ib = b.find(rec->id);
        if (ia == a.end()) missing.push_back(rec->id + " (a)");
        if (ib == b.end()) missing.push_back(rec->id + " (b)");
        if (ia == a.end() || ib == b.end()) {
            continue;
        }
        gold[rec->id] = load_gold_checked(m, *rec, dimension, ia->second.values.size()).values;
        dev_a.push_back(ia->second);
        dev_b.push_back(ib->second);
    }
    if (!missing.empty()) {
        std::string msg = "fuse: dev predictions missing for";
        for (const auto& id : missing) msg += " " + id;
        throw InvalidArgument(msg);
    }
    FuseSummary res;
    res.search = grid_search_weights(dev_a, dev_b, gold, grid);
    write_file_bytes(out / "fusion_report.csv", format_fusion_report(res.search));
    const std::string src_a = a.empty() ? "a" : a.begin()->second.source;
    const std::string src_b = b.empty() ? "b" : b.begin()->second.source;
    nlohmann::json info{{"source_a", src_a},
                        {"source_b", src_b},
                        {"w_a", res.search.best.w_a},
                        {"w_b", res.search.best.w_b},
                        {"dev_ccc", res.search.best.dev_ccc}};
    write_file_bytes(out / "fusion.json", info.dump(2) + "\n");
    for (const auto& [id, ta] : a) {
        const auto ib = b.find(id);
        if (ib == b.end()) {
            continue;
        }
        const auto* rec = m.find(id);
        const std::int64_t seg = rec ? rec->segment_ms : 250;
        const auto fused = fuse(ta, ib->second, res.search.best.w_a);
        write_file_bytes(out / "predictions" / (id + ".csv"), format_prediction_csv(fused.values, seg));
        res.fused_ids.push_back(id);
    }
    return res;
}

// --- plot ------------------------------------------------------------------

inline std::string cmd_plot(const PlotTrack& gold, const std::vector<PlotTrack>& preds, const fs::path& out,
                            const PlotStyle& style = {}) {
    auto svg = render_svg(gold, preds, style);
    write_file_bytes(out, svg);
    return svg;
}

}  // namespace emoseq
