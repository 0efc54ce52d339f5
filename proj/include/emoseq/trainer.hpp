#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "emoseq/adam.hpp"
#include "emoseq/core.hpp"
#include "emoseq/metrics.hpp"
#include "emoseq/model.hpp"

namespace emoseq {

/// One conversation ready for the network: normalized inputs and its gold track.
struct Conversation {
    std::string id;
    RowMatrixf x;
    std::vector<double> gold;
};

struct TrainOptions {
    std::size_t epochs = 500;
    std::size_t batch_size = 15;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    /// Global gradient-norm clip; 0 disables clipping.
    double clip_norm = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double dev_ccc = 0.0;
    double wall_ms = 0.0;
};

struct TrainRecord {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_dev_ccc = -2.0;
};

struct TrainResult {
    ModelParams<float> best;
    ModelParams<float> last;
    TrainRecord record;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

inline std::vector<double> predict(const ModelParams<float>& p, const RowMatrixf& x) {
    const auto y = forward(p, x);
    return std::vector<double>(y.data(), y.data() + y.size());
}

/// CCC over the concatenation of all conversations.
inline double concat_ccc(const ModelParams<float>& p, std::span<const Conversation> convs) {
    std::vector<double> pred, gold;
    for (const auto& c : convs) {
        const auto y = predict(p, c.x);
        pred.insert(pred.end(), y.begin(), y.end());
        gold.insert(gold.end(), c.gold.begin(), c.gold.end());
    }
    return ccc(pred, gold);
}

namespace detail {

inline void check_conversations(std::span<const Conversation> convs, const ModelConfig& cfg, const char* subset) {
    if (convs.empty()) {
        throw InvalidArgument(std::string("train: the ") + subset + " subset is empty");
    }
    for (const auto& c : convs) {
        if (static_cast<std::size_t>(c.x.cols()) != cfg.input_dim) {
            throw SchemaError("train: conversation " + c.id + " has " + std::to_string(c.x.cols()) +
                              " features, model expects " + std::to_string(cfg.input_dim));
        }
        if (static_cast<std::size_t>(c.x.rows()) != c.gold.size()) {
            throw SchemaError("train: conversation " + c.id + " has " + std::to_string(c.x.rows()) +
                              " feature rows but " + std::to_string(c.gold.size()) + " gold values");
        }
        if (c.gold.size() < 2) {
            throw InvalidArgument("train: conversation " + c.id + " has fewer than 2 segments");
        }
    }
}

}  // namespace detail

/// Mini-batch training from `init`. Each epoch shuffles the training
/// conversations with a generator seeded by (seed, epoch), runs every
/// conversation of a batch at full length, averages the gradients in batch
/// order and takes one Adam step. The dev concatenated CCC after each epoch
/// selects the returned best parameters (earliest epoch wins ties).
inline TrainResult train(const ModelParams<float>& init, std::span<const Conversation> train_set,
                         std::span<const Conversation> dev_set, const TrainOptions& opt,
                         const EpochCallback& on_epoch = {}) {
    detail::check_conversations(train_set, init.config, "train");
    detail::check_conversations(dev_set, init.config, "dev");
    if (opt.batch_size == 0) {
        throw InvalidArgument("train: batch size must be positive");
    }
    if (!(opt.learning_rate > 0)) {
        throw InvalidArgument("train: learning rate must be positive");
    }

    TrainResult res{init, init, {}};
    auto& params = res.last;
    AdamHyper hyper;
    hyper.learning_rate = opt.learning_rate;
    OptimState<float> state(params.values.size(), hyper);
    auto grad = params.zeros_like();

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t e = 1; e <= opt.epochs; ++e) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(detail::mix64(opt.seed) ^ e);
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
            const std::size_t stop = std::min(order.size(), start + opt.batch_size);
            std::fill(grad.values.begin(), grad.values.end(), 0.0f);
            for (std::size_t k = start; k < stop; ++k) {
                const auto& c = train_set[order[k]];
                auto r = backward(params, c.x, c.gold);
                loss_sum += r.loss;
                for (std::size_t i = 0; i < grad.values.size(); ++i) {
                    grad.values[i] += r.grad.values[i];
                }
            }
            const float inv = 1.0f / static_cast<float>(stop - start);
            double norm2 = 0.0;
            for (auto& g : grad.values) {
                g *= inv;
                norm2 += static_cast<double>(g) * g;
            }
            if (opt.clip_norm > 0 && std::sqrt(norm2) > opt.clip_norm) {
                const auto s = static_cast<float>(opt.clip_norm / std::sqrt(norm2));
                for (auto& g : grad.values) {
                    g *= s;
                }
            }
            adam_step(params, grad, state);
        }

        EpochRecord rec;
        rec.epoch = e;
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        rec.dev_ccc = concat_ccc(params, dev_set);
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (rec.dev_ccc > res.record.best_dev_ccc) {
            res.record.best_dev_ccc = rec.dev_ccc;
            res.record.best_epoch = e;
            res.best = params;
        }
        res.record.epochs.push_back(rec);
        if (on_epoch) {
            on_epoch(rec);
        }
    }
    return res;
}

}  // namespace emoseq
