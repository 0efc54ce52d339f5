#pragma once

// Sequence regressor: optional dense reducer (affine + tanh), a stack of
// bidirectional LSTM layers whose direction outputs are concatenated, and a
// single linear output neuron applied at every segment.
//
// Parameters live in one flat vector. Topological order of the tensors:
//
//   reducer.weight (R x I, row-major), reducer.bias (R)      [if present]
//   for each layer l, for direction in (forward, backward):
//     input weights  (4H x I_l), recurrent weights (4H x H), bias (4H)
//   output.weight (2 H_last), output.bias (1)
//
// Gate blocks are stacked in the order input, forget, cell, output.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "emoseq/core.hpp"
#include "emoseq/metrics.hpp"

namespace emoseq {

struct ModelConfig {
    std::size_t input_dim = 0;
    std::optional<std::size_t> reducer_dim;
    std::vector<std::size_t> layer_units{200, 64, 32, 32};
    bool output_tanh = false;
    std::uint64_t seed = 0;

    bool operator==(const ModelConfig&) const = default;

    void validate() const {
        if (input_dim == 0) {
            throw InvalidArgument("model config: input_dim must be positive");
        }
        if (reducer_dim && *reducer_dim == 0) {
            throw InvalidArgument("model config: reducer_dim must be positive when present");
        }
        if (layer_units.empty()) {
            throw InvalidArgument("model config: at least one recurrent layer is required");
        }
        for (auto u : layer_units) {
            if (u == 0) {
                throw InvalidArgument("model config: layer sizes must be positive");
            }
        }
    }

    /// Same network shape; the seed only matters at initialization.
    bool same_architecture(const ModelConfig& o) const {
        return input_dim == o.input_dim && reducer_dim == o.reducer_dim && layer_units == o.layer_units &&
               output_tanh == o.output_tanh;
    }
};

struct TensorSlot {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 1;

    std::size_t size() const { return rows * cols; }
};

/// Offsets of every tensor inside the flat parameter vector.
struct ModelLayout {
    struct Direction {
        TensorSlot input_weights, recurrent_weights, bias;
    };
    struct Layer {
        std::size_t units = 0;
        std::size_t input_dim = 0;
        Direction dir[2];
    };

    std::optional<TensorSlot> reducer_weights, reducer_bias;
    std::vector<Layer> layers;
    TensorSlot output_weights, output_bias;
    std::size_t total = 0;

    explicit ModelLayout(const ModelConfig& cfg) {
        cfg.validate();
        auto add = [this](std::string name, std::size_t rows, std::size_t cols) {
            TensorSlot s{std::move(name), total, rows, cols};
            total += rows * cols;
            return s;
        };
        std::size_t in = cfg.input_dim;
        if (cfg.reducer_dim) {
            reducer_weights = add("reducer.weight", *cfg.reducer_dim, in);
            reducer_bias = add("reducer.bias", *cfg.reducer_dim, 1);
            in = *cfg.reducer_dim;
        }
        for (std::size_t l = 0; l < cfg.layer_units.size(); ++l) {
            Layer layer;
            layer.units = cfg.layer_units[l];
            layer.input_dim = in;
            const std::string p = "lstm" + std::to_string(l);
            for (int d = 0; d < 2; ++d) {
                const std::string q = p + (d == 0 ? ".fwd" : ".bwd");
                layer.dir[d].input_weights = add(q + ".input_weight", 4 * layer.units, in);
                layer.dir[d].recurrent_weights = add(q + ".recurrent_weight", 4 * layer.units, layer.units);
                layer.dir[d].bias = add(q + ".bias", 4 * layer.units, 1);
            }
            layers.push_back(std::move(layer));
            in = 2 * cfg.layer_units[l];
        }
        output_weights = add("output.weight", in, 1);
        output_bias = add("output.bias", 1, 1);
    }

    std::vector<TensorSlot> slots() const {
        std::vector<TensorSlot> out;
        if (reducer_weights) {
            out.push_back(*reducer_weights);
            out.push_back(*reducer_bias);
        }
        for (const auto& l : layers) {
            for (const auto& d : l.dir) {
                out.push_back(d.input_weights);
                out.push_back(d.recurrent_weights);
                out.push_back(d.bias);
            }
        }
        out.push_back(output_weights);
        out.push_back(output_bias);
        return out;
    }
};

/// Trainable parameters (or a gradient of the same shape).
template <typename Scalar>
struct ModelParams {
    using Mat = RowMatrix<Scalar>;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using MatMap = Eigen::Map<Mat>;
    using ConstMatMap = Eigen::Map<const Mat>;
    using VecMap = Eigen::Map<Vec>;
    using ConstVecMap = Eigen::Map<const Vec>;

    /// Aligned storage keeps Eigen's vectorized kernels on the same code path
    /// from run to run, so results do not depend on where the heap puts them.
    using Storage = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;

    ModelConfig config;
    ModelLayout layout;
    Storage values;

    explicit ModelParams(ModelConfig cfg) : config(std::move(cfg)), layout(config), values(layout.total, Scalar(0)) {}

    /// Zero-filled tensor set with the same structure.
    ModelParams zeros_like() const { return ModelParams(config); }

    MatMap mat(const TensorSlot& s) {
        return MatMap(values.data() + s.offset, static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
    }
    ConstMatMap mat(const TensorSlot& s) const {
        return ConstMatMap(values.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                           static_cast<Eigen::Index>(s.cols));
    }
    VecMap vec(const TensorSlot& s) { return VecMap(values.data() + s.offset, static_cast<Eigen::Index>(s.size())); }
    ConstVecMap vec(const TensorSlot& s) const {
        return ConstVecMap(values.data() + s.offset, static_cast<Eigen::Index>(s.size()));
    }

    Scalar& output_bias() { return values[layout.output_bias.offset]; }
    Scalar output_bias() const { return values[layout.output_bias.offset]; }

    template <typename Other>
    ModelParams<Other> cast() const {
        ModelParams<Other> out(config);
        for (std::size_t i = 0; i < values.size(); ++i) {
            out.values[i] = static_cast<Other>(values[i]);
        }
        return out;
    }
};

namespace detail {

/// Uniform in [-1, 1) from (seed, global element index).
inline double counter_uniform(std::uint64_t seed, std::uint64_t index) {
    const std::uint64_t bits = mix64(mix64(seed) ^ index);
    return static_cast<double>(bits >> 11) * 0x1.0p-52 - 1.0;
}

}  // namespace detail

/// Xavier-uniform weights, zero biases except the forget gate at 1.0. Each
/// element's value depends only on the seed and its position in the flat
/// vector.
template <typename Scalar = float>
ModelParams<Scalar> init_params(const ModelConfig& cfg) {
    ModelParams<Scalar> p(cfg);
    auto xavier = [&](const TensorSlot& s, std::size_t fan_in, std::size_t fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < s.size(); ++i) {
            p.values[s.offset + i] = static_cast<Scalar>(bound * detail::counter_uniform(cfg.seed, s.offset + i));
        }
    };
    const auto& lay = p.layout;
    if (lay.reducer_weights) {
        xavier(*lay.reducer_weights, lay.reducer_weights->cols, lay.reducer_weights->rows);
    }
    for (const auto& layer : lay.layers) {
        for (const auto& d : layer.dir) {
            xavier(d.input_weights, d.input_weights.cols, d.input_weights.rows);
            xavier(d.recurrent_weights, d.recurrent_weights.cols, d.recurrent_weights.rows);
            for (std::size_t u = 0; u < layer.units; ++u) {
                p.values[d.bias.offset + layer.units + u] = Scalar(1);
            }
        }
    }
    xavier(lay.output_weights, lay.output_weights.rows, 1);
    return p;
}

/// Activations of one direction of one layer, indexed by natural time.
template <typename Scalar>
struct DirectionTrace {
    RowMatrix<Scalar> gates;   // T x 4H activated (i, f, g, o)
    RowMatrix<Scalar> cells;   // T x H
    RowMatrix<Scalar> hidden;  // T x H
};

template <typename Scalar>
struct ForwardTrace {
    RowMatrix<Scalar> reduced;                    // T x R, empty without reducer
    std::vector<RowMatrix<Scalar>> layer_output;  // per layer T x 2H
    std::vector<std::array<DirectionTrace<Scalar>, 2>> dirs;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> output;
};

namespace detail {

template <typename Scalar>
void lstm_direction_forward(const ModelParams<Scalar>& p, const ModelLayout::Direction& slots, std::size_t units,
                            const RowMatrix<Scalar>& input, bool reverse, DirectionTrace<Scalar>& tr) {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const auto T = input.rows();
    const auto H = static_cast<Eigen::Index>(units);
    const auto wx = p.mat(slots.input_weights);
    const auto wh = p.mat(slots.recurrent_weights);
    const auto b = p.vec(slots.bias);

    tr.gates.noalias() = input * wx.transpose();
    tr.gates.rowwise() += b.transpose();
    tr.cells.resize(T, H);
    tr.hidden.resize(T, H);
    Vec h = Vec::Zero(H);
    Vec c = Vec::Zero(H);
    Vec a(4 * H);
    for (Eigen::Index s = 0; s < T; ++s) {
        const Eigen::Index t = reverse ? T - 1 - s : s;
        a = tr.gates.row(t).transpose();
        a.noalias() += wh * h;
        auto ai = a.segment(0, H).array();
        auto af = a.segment(H, H).array();
        auto ag = a.segment(2 * H, H).array();
        auto ao = a.segment(3 * H, H).array();
        ai = Scalar(1) / (Scalar(1) + (-ai).exp());
        af = Scalar(1) / (Scalar(1) + (-af).exp());
        ag = ag.tanh();
        ao = Scalar(1) / (Scalar(1) + (-ao).exp());
        c.array() = af * c.array() + ai * ag;
        h.array() = ao * c.array().tanh();
        tr.gates.row(t) = a.transpose();
        tr.cells.row(t) = c.transpose();
        tr.hidden.row(t) = h.transpose();
    }
}

/// Accumulates this direction's parameter gradients into `grad` and adds the
/// gradient with respect to its input into `d_input`.
template <typename Scalar>
void lstm_direction_backward(const ModelParams<Scalar>& p, ModelParams<Scalar>& grad,
                             const ModelLayout::Direction& slots, std::size_t units, const RowMatrix<Scalar>& input,
                             bool reverse, const DirectionTrace<Scalar>& tr, const RowMatrix<Scalar>& d_hidden,
                             RowMatrix<Scalar>& d_input) {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    const auto T = input.rows();
    const auto H = static_cast<Eigen::Index>(units);
    const auto wx = p.mat(slots.input_weights);
    const auto wh = p.mat(slots.recurrent_weights);

    RowMatrix<Scalar> d_pre(T, 4 * H);
    RowMatrix<Scalar> h_prev = RowMatrix<Scalar>::Zero(T, H);
    Vec dh_next = Vec::Zero(H);
    Arr dc_next = Arr::Zero(H);
    Arr c_prev(H);
    for (Eigen::Index s = T - 1; s >= 0; --s) {
        const Eigen::Index t = reverse ? T - 1 - s : s;
        const Eigen::Index t_prev = reverse ? t + 1 : t - 1;
        if (s > 0) {
            c_prev = tr.cells.row(t_prev).transpose().array();
            h_prev.row(t) = tr.hidden.row(t_prev);
        } else {
            c_prev.setZero();
        }
        const Arr i = tr.gates.row(t).segment(0, H).transpose().array();
        const Arr f = tr.gates.row(t).segment(H, H).transpose().array();
        const Arr g = tr.gates.row(t).segment(2 * H, H).transpose().array();
        const Arr o = tr.gates.row(t).segment(3 * H, H).transpose().array();
        const Arr tc = tr.cells.row(t).transpose().array().tanh();

        const Arr dh = d_hidden.row(t).transpose().array() + dh_next.array();
        const Arr dc = dc_next + dh * o * (Scalar(1) - tc * tc);
        auto row = d_pre.row(t);
        row.segment(0, H) = (dc * g * i * (Scalar(1) - i)).transpose();
        row.segment(H, H) = (dc * c_prev * f * (Scalar(1) - f)).transpose();
        row.segment(2 * H, H) = (dc * i * (Scalar(1) - g * g)).transpose();
        row.segment(3 * H, H) = (dh * tc * o * (Scalar(1) - o)).transpose();
        dc_next = dc * f;
        dh_next.noalias() = wh.transpose() * row.transpose();
    }
    grad.mat(slots.input_weights).noalias() += d_pre.transpose() * input;
    grad.mat(slots.recurrent_weights).noalias() += d_pre.transpose() * h_prev;
    grad.vec(slots.bias) += d_pre.colwise().sum().transpose();
    d_input.noalias() += d_pre * wx;
}

inline void check_input(const ModelConfig& cfg, Eigen::Index rows, Eigen::Index cols) {
    if (static_cast<std::size_t>(cols) != cfg.input_dim) {
        throw SchemaError("model expects " + std::to_string(cfg.input_dim) + " input features, got " +
                          std::to_string(cols));
    }
    if (rows < 1) {
        throw InvalidArgument("model input has no time steps");
    }
}

}  // namespace detail

/// Per-segment predictions for a T x input_dim sequence. When `trace` is
/// given, every intermediate activation needed by backward() is kept.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> forward(const ModelParams<Scalar>& p, const RowMatrix<Scalar>& x,
                                                 ForwardTrace<Scalar>* trace = nullptr) {
    detail::check_input(p.config, x.rows(), x.cols());
    const auto& lay = p.layout;
    ForwardTrace<Scalar> local;
    ForwardTrace<Scalar>& tr = trace ? *trace : local;
    tr.layer_output.assign(lay.layers.size(), {});
    tr.dirs.assign(lay.layers.size(), {});

    const RowMatrix<Scalar>* in = &x;
    if (lay.reducer_weights) {
        tr.reduced.noalias() = x * p.mat(*lay.reducer_weights).transpose();
        tr.reduced.rowwise() += p.vec(*lay.reducer_bias).transpose();
        tr.reduced = tr.reduced.array().tanh().matrix();
        in = &tr.reduced;
    } else {
        tr.reduced.resize(0, 0);
    }
    for (std::size_t l = 0; l < lay.layers.size(); ++l) {
        const auto& layer = lay.layers[l];
        const auto H = static_cast<Eigen::Index>(layer.units);
        for (int d = 0; d < 2; ++d) {
            detail::lstm_direction_forward(p, layer.dir[d], layer.units, *in, d == 1, tr.dirs[l][d]);
        }
        auto& out = tr.layer_output[l];
        out.resize(x.rows(), 2 * H);
        out.leftCols(H) = tr.dirs[l][0].hidden;
        out.rightCols(H) = tr.dirs[l][1].hidden;
        in = &out;
        if (!trace && l > 0) {
            // Inference only needs the previous layer's output.
            tr.layer_output[l - 1].resize(0, 0);
            tr.dirs[l - 1] = {};
        }
    }
    tr.output.noalias() = *in * p.vec(lay.output_weights);
    tr.output.array() += p.output_bias();
    if (p.config.output_tanh) {
        tr.output = tr.output.array().tanh().matrix();
    }
    return tr.output;
}

template <typename Scalar>
struct BackwardResult {
    double loss = 0.0;
    ModelParams<Scalar> grad;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> output;
};

/// Exact gradient of 1 - ccc(forward(x), gold) with respect to every
/// parameter, by reverse accumulation through the output neuron, both
/// directions of every layer and the reducer.
template <typename Scalar>
BackwardResult<Scalar> backward(const ModelParams<Scalar>& p, const RowMatrix<Scalar>& x,
                                std::span<const double> gold) {
    detail::check_input(p.config, x.rows(), x.cols());
    if (x.rows() < 2) {
        throw InvalidArgument("backward: need at least 2 time steps for a concordance loss");
    }
    if (static_cast<std::size_t>(x.rows()) != gold.size()) {
        throw SchemaError("backward: " + std::to_string(x.rows()) + " time steps but " +
                          std::to_string(gold.size()) + " targets");
    }
    const auto& lay = p.layout;
    ForwardTrace<Scalar> tr;
    forward(p, x, &tr);

    std::vector<double> pred(static_cast<std::size_t>(tr.output.size()));
    for (std::size_t i = 0; i < pred.size(); ++i) {
        pred[i] = static_cast<double>(tr.output(static_cast<Eigen::Index>(i)));
    }
    BackwardResult<Scalar> res{ccc_loss(pred, gold), p.zeros_like(), tr.output};
    auto& grad = res.grad;
    const auto dpred = ccc_loss_grad(pred, gold);

    const auto T = x.rows();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dy(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        dy(t) = static_cast<Scalar>(dpred[static_cast<std::size_t>(t)]);
    }
    if (p.config.output_tanh) {
        dy.array() *= Scalar(1) - tr.output.array().square();
    }
    const auto& top = tr.layer_output.back();
    grad.vec(lay.output_weights).noalias() += top.transpose() * dy;
    grad.output_bias() += dy.sum();
    RowMatrix<Scalar> d_out = dy * p.vec(lay.output_weights).transpose();

    for (std::size_t l = lay.layers.size(); l-- > 0;) {
        const auto& layer = lay.layers[l];
        const auto H = static_cast<Eigen::Index>(layer.units);
        const RowMatrix<Scalar>& in = l > 0 ? tr.layer_output[l - 1] : (lay.reducer_weights ? tr.reduced : x);
        RowMatrix<Scalar> d_in = RowMatrix<Scalar>::Zero(T, in.cols());
        for (int d = 0; d < 2; ++d) {
            const RowMatrix<Scalar> d_hidden = d == 0 ? d_out.leftCols(H) : d_out.rightCols(H);
            detail::lstm_direction_backward(p, grad, layer.dir[d], layer.units, in, d == 1, tr.dirs[l][d], d_hidden,
                                            d_in);
        }
        d_out = std::move(d_in);
    }
    if (lay.reducer_weights) {
        const RowMatrix<Scalar> d_pre = (d_out.array() * (Scalar(1) - tr.reduced.array().square())).matrix();
        grad.mat(*lay.reducer_weights).noalias() += d_pre.transpose() * x;
        grad.vec(*lay.reducer_bias) += d_pre.colwise().sum().transpose();
    }
    return res;
}

}  // namespace emoseq
