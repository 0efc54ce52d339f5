// emoseq: command-line front end for the speech emotion regression workflow.
//
//   emoseq synth   --out DIR [--seed N] [--train N --dev N --test N]
//   emoseq extract --manifest M --feature-set FS --out FEATURES
//   emoseq train   --manifest M --features FEATURES --feature-set FS --dimension D --out RUN [--config C]
//   emoseq eval    --manifest M --features FEATURES --checkpoint RUN/best.serm --subset dev --out EVAL
//   emoseq fuse    --manifest M --dimension D --preds-a EVAL_A --preds-b EVAL_B --out FUSED
//   emoseq plot    --gold G.csv --pred name=P.csv [--pred ...] --out plot.svg
//
// Exit status: 0 on success, 2 on data errors, 1 on usage errors. Failures
// print one line per problem on stderr:
//   error: kind=<kind> command=<command> [conversation=<id>] message="<text>"

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "emoseq/emoseq.hpp"
#include "emoseq/synth.hpp"

namespace {

using namespace emoseq;

void report(const std::string& command, const std::string& kind, const std::string& message,
            const std::string& conversation = {}) {
    std::cerr << "error: kind=" << kind << " command=" << command;
    if (!conversation.empty()) {
        std::cerr << " conversation=" << conversation;
    }
    std::cerr << " message=" << nlohmann::json(message).dump() << "\n";
}

struct Flags {
    std::string manifest, out, features, feature_set, dimension, config, checkpoint, subset = "dev";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs, batch_size;
    std::optional<double> lr;
    std::string layers, reducer, warm_start;
    std::size_t log_every = 25;
    // synth
    std::size_t n_train = 10, n_dev = 3, n_test = 3;
    std::int64_t min_ms = 60000, max_ms = 120000, segment_ms = 250;
    int sample_rate = 8000;
    double annotator_noise = 0.1;
    bool no_lld = false;
    // fuse
    std::string preds_a, preds_b;
    // plot
    std::string gold, conversation, title;
    std::vector<std::string> preds;
};

std::vector<std::size_t> parse_layers(const std::string& s) {
    std::vector<std::size_t> out;
    for (auto f : csv::split(s)) {
        long long v = 0;
        if (!csv::parse_int(f, v) || v <= 0) {
            throw InvalidArgument("--layers expects a comma-separated list of positive sizes, got '" + s + "'");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

int run_synth(const Flags& f) {
    SynthSpec spec;
    spec.n_train = f.n_train;
    spec.n_dev = f.n_dev;
    spec.n_test = f.n_test;
    spec.min_duration_ms = f.min_ms;
    spec.max_duration_ms = f.max_ms;
    spec.segment_ms = f.segment_ms;
    spec.sample_rate_hz = f.sample_rate;
    spec.annotator_noise = f.annotator_noise;
    spec.write_lld = !f.no_lld;
    if (f.seed) spec.seed = *f.seed;
    if (!f.dimension.empty()) spec.dimension = f.dimension;
    const auto m = generate_synthetic(spec, f.out);
    std::cout << "synth: " << m.conversations.size() << " conversations -> "
              << (fs::path(f.out) / "manifest.json").string() << "\n";
    return 0;
}

int run_extract(const Flags& f) {
    const auto m = load_manifest(f.manifest);
    const std::string fs_name = f.feature_set.empty() ? "mfcc-stats" : f.feature_set;
    const auto rep = cmd_extract(m, fs_name, f.out);
    for (const auto& [id, err] : rep.failed) {
        report("extract", err.kind(), err.what(), id);
    }
    std::cout << "extract: feature_set=" << fs_name << " written=" << rep.written.size()
              << " skipped=" << rep.skipped.size() << " failed=" << rep.failed.size() << "\n";
    return rep.failed.empty() ? 0 : 2;
}

int run_train(const Flags& f) {
    RunConfig rc;
    if (!f.config.empty()) rc = load_run_config(f.config);
    if (!f.manifest.empty()) rc.manifest = f.manifest;
    if (!f.out.empty()) rc.out = f.out;
    if (!f.features.empty()) rc.features_dir = f.features;
    if (!f.feature_set.empty()) rc.feature_set = f.feature_set;
    if (!f.dimension.empty()) rc.dimension = f.dimension;
    if (f.seed) rc.seed = *f.seed;
    if (f.epochs) rc.epochs = *f.epochs;
    if (f.batch_size) rc.batch_size = *f.batch_size;
    if (f.lr) rc.learning_rate = *f.lr;
    if (!f.layers.empty()) rc.layer_units = parse_layers(f.layers);
    if (!f.warm_start.empty()) rc.warm_start = f.warm_start;
    if (f.reducer == "none") {
        rc.reducer_dim = std::optional<std::size_t>{};
    } else if (!f.reducer.empty() && f.reducer != "auto") {
        long long v = 0;
        if (!csv::parse_int(f.reducer, v) || v <= 0) {
            throw InvalidArgument("--reducer expects auto, none or a positive size");
        }
        rc.reducer_dim = std::optional<std::size_t>{static_cast<std::size_t>(v)};
    }
    if (rc.manifest.empty() || rc.out.empty() || rc.features_dir.empty()) {
        throw InvalidArgument("train needs --manifest, --features and --out (or the same fields in --config)");
    }
    const std::size_t every = f.log_every;
    const auto summary = cmd_train(rc, [every](const EpochRecord& e) {
        if (every > 0 && (e.epoch % every == 0 || e.epoch == 1)) {
            std::fprintf(stderr, "epoch %zu train_loss=%.5f dev_ccc=%.5f (%.0f ms)\n", e.epoch, e.train_loss,
                         e.dev_ccc, e.wall_ms);
        }
    });
    std::cout << "train: best_epoch=" << summary.record.best_epoch
              << " dev_ccc=" << csv::format_fixed(summary.record.best_dev_ccc, 4) << " -> " << rc.out << "\n";
    return 0;
}

int run_eval(const Flags& f) {
    const auto m = load_manifest(f.manifest);
    const auto res = cmd_eval(f.checkpoint, m, parse_subset(f.subset), f.features, f.out);
    std::cout << "eval: subset=" << f.subset << " concat_ccc=" << csv::format_fixed(res.report.ccc_concat, 4)
              << " conversations=" << res.predictions.size() << "\n";
    return 0;
}

int run_fuse(const Flags& f) {
    const auto m = load_manifest(f.manifest);
    const std::string dim = f.dimension.empty() ? "satisfaction" : f.dimension;
    const auto res = cmd_fuse(f.preds_a, f.preds_b, m, dim, f.out);
    std::cout << "fuse: w_a=" << csv::format_fixed(res.search.best.w_a, 2)
              << " w_b=" << csv::format_fixed(res.search.best.w_b, 2)
              << " dev_ccc=" << csv::format_fixed(res.search.best.dev_ccc, 4) << "\n";
    return 0;
}

int run_plot(const Flags& f) {
    PlotTrack gold{"gold", {}};
    if (!f.gold.empty()) {
        gold.values = read_value_csv(f.gold);
    } else if (!f.manifest.empty() && !f.conversation.empty()) {
        const auto m = load_manifest(f.manifest);
        const auto* rec = m.find(f.conversation);
        if (!rec) {
            throw InvalidArgument("conversation '" + f.conversation + "' is not in the manifest");
        }
        gold.values = load_gold(m, *rec, f.dimension.empty() ? "satisfaction" : f.dimension).values;
    } else {
        throw InvalidArgument("plot needs --gold or --manifest with --conversation");
    }
    std::vector<PlotTrack> preds;
    for (const auto& p : f.preds) {
        const auto eq = p.find('=');
        const std::string path = eq == std::string::npos ? p : p.substr(eq + 1);
        const std::string name = eq == std::string::npos ? fs::path(p).stem().string() : p.substr(0, eq);
        preds.push_back({name, read_value_csv(path)});
    }
    PlotStyle style;
    if (!f.title.empty()) style.title = f.title;
    cmd_plot(gold, preds, f.out, style);
    std::cout << "plot: " << preds.size() + 1 << " tracks -> " << f.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous speech emotion regression toolkit"};
    app.require_subcommand(1);
    Flags f;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with a manifest");
    synth->add_option("--out", f.out, "Output directory")->required();
    synth->add_option("--seed", f.seed, "Generator seed (default 7)");
    synth->add_option("--train", f.n_train, "Train conversations");
    synth->add_option("--dev", f.n_dev, "Dev conversations");
    synth->add_option("--test", f.n_test, "Test conversations");
    synth->add_option("--min-ms", f.min_ms, "Shortest conversation in ms");
    synth->add_option("--max-ms", f.max_ms, "Longest conversation in ms");
    synth->add_option("--segment-ms", f.segment_ms, "Segment duration in ms");
    synth->add_option("--sample-rate", f.sample_rate, "Audio sample rate in Hz");
    synth->add_option("--dimension", f.dimension, "Name of the annotated dimension");
    synth->add_option("--annotator-noise", f.annotator_noise, "Standard deviation of annotator noise");
    synth->add_flag("--no-lld", f.no_lld, "Skip the descriptor CSV files");

    auto* extract = app.add_subcommand("extract", "Compute per-segment feature caches");
    extract->add_option("--manifest", f.manifest, "Dataset manifest")->required();
    extract->add_option("--feature-set", f.feature_set, "mfcc-stats, egemaps-stats or an embeddings key, optionally +spk");
    extract->add_option("--out", f.out, "Feature directory")->required();

    auto* train = app.add_subcommand("train", "Train a regressor on cached features");
    train->add_option("--config", f.config, "Run configuration JSON");
    train->add_option("--manifest", f.manifest, "Dataset manifest");
    train->add_option("--features", f.features, "Feature directory written by extract");
    train->add_option("--out", f.out, "Run directory");
    train->add_option("--feature-set", f.feature_set, "Feature set");
    train->add_option("--dimension", f.dimension, "Annotated dimension");
    train->add_option("--seed", f.seed, "Initialization and shuffling seed");
    train->add_option("--epochs", f.epochs, "Epochs (default 500)");
    train->add_option("--batch-size", f.batch_size, "Conversations per batch (default 15)");
    train->add_option("--lr", f.lr, "Adam learning rate (default 0.001)");
    train->add_option("--layers", f.layers, "Comma-separated biLSTM sizes (default 200,64,32,32)");
    train->add_option("--reducer", f.reducer, "Dense reducer width: auto, none or a size");
    train->add_option("--warm-start", f.warm_start, "Checkpoint to continue from");
    train->add_option("--log-every", f.log_every, "Progress line interval in epochs, 0 for silence");

    auto* eval = app.add_subcommand("eval", "Score a checkpoint on one subset");
    eval->add_option("--manifest", f.manifest, "Dataset manifest")->required();
    eval->add_option("--features", f.features, "Feature directory")->required();
    eval->add_option("--checkpoint", f.checkpoint, "Checkpoint file")->required();
    eval->add_option("--subset", f.subset, "train, dev or test");
    eval->add_option("--out", f.out, "Output directory")->required();

    auto* fuse = app.add_subcommand("fuse", "Weighted fusion of two prediction sets");
    fuse->add_option("--manifest", f.manifest, "Dataset manifest")->required();
    fuse->add_option("--dimension", f.dimension, "Annotated dimension");
    fuse->add_option("--preds-a", f.preds_a, "Eval directory of the first model")->required();
    fuse->add_option("--preds-b", f.preds_b, "Eval directory of the second model")->required();
    fuse->add_option("--out", f.out, "Output directory")->required();

    auto* plot = app.add_subcommand("plot", "Plot gold and predicted traces as SVG");
    plot->add_option("--gold", f.gold, "CSV with a value column");
    plot->add_option("--manifest", f.manifest, "Manifest to take the gold track from");
    plot->add_option("--conversation", f.conversation, "Conversation id when using --manifest");
    plot->add_option("--dimension", f.dimension, "Annotated dimension when using --manifest");
    plot->add_option("--pred", f.preds, "Prediction CSV, optionally NAME=PATH")->required();
    plot->add_option("--title", f.title, "Chart title");
    plot->add_option("--out", f.out, "SVG file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report("parse", "usage", e.what());
        return 1;
    }

    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        if (name == "synth") return run_synth(f);
        if (name == "extract") return run_extract(f);
        if (name == "train") return run_train(f);
        if (name == "eval") return run_eval(f);
        if (name == "fuse") return run_fuse(f);
        if (name == "plot") return run_plot(f);
    } catch (const ConversationError& e) {
        report(name, e.kind(), e.detail(), e.conversation_id());
        return 2;
    } catch (const Error& e) {
        report(name, e.kind(), e.what());
        return 2;
    } catch (const fs::filesystem_error& e) {
        report(name, "io", e.what());
        return 2;
    } catch (const std::exception& e) {
        report(name, "internal", e.what());
        return 1;
    }
    return 1;
}
