#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "emoseq/adam.hpp"
#include "emoseq/checkpoint.hpp"
#include "emoseq/model.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace emoseq;
namespace fs = std::filesystem;

namespace {

ModelConfig small_config(std::size_t input, std::optional<std::size_t> reducer, std::vector<std::size_t> units) {
    ModelConfig c;
    c.input_dim = input;
    c.reducer_dim = reducer;
    c.layer_units = std::move(units);
    return c;
}

RowMatrixd random_input(std::size_t T, std::size_t D, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    RowMatrixd x(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(D));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
    return x;
}

std::vector<std::vector<double>> rows_of(const RowMatrixd& x) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index t = 0; t < x.rows(); ++t) out[static_cast<std::size_t>(t)].assign(x.row(t).begin(), x.row(t).end());
    return out;
}

}  // namespace

TEST(ModelLayout, ParameterCount) {
    const ModelLayout lay(small_config(48, std::nullopt, {200, 64, 32, 32}));
    std::size_t expect = 0, in = 48;
    for (std::size_t h : {200, 64, 32, 32}) {
        expect += 2 * (4 * h * in + 4 * h * h + 4 * h);
        in = 2 * h;
    }
    expect += in + 1;
    EXPECT_EQ(lay.total, expect);

    const ModelLayout red(small_config(512, 40, {4}));
    EXPECT_EQ(red.total, 40 * 512 + 40 + 2 * (16 * 40 + 16 * 4 + 16) + 8 + 1u);
    EXPECT_EQ(red.slots().front().name, "reducer.weight");
    EXPECT_EQ(red.slots().back().name, "output.bias");
    EXPECT_FALSE(lay.reducer_weights.has_value());
}

TEST(ModelLayout, InvalidConfigs) {
    EXPECT_THROW(ModelLayout(small_config(0, std::nullopt, {4})), InvalidArgument);
    EXPECT_THROW(ModelLayout(small_config(3, 0, {4})), InvalidArgument);
    EXPECT_THROW(ModelLayout(small_config(3, std::nullopt, {})), InvalidArgument);
    EXPECT_THROW(ModelLayout(small_config(3, std::nullopt, {4, 0})), InvalidArgument);
}

TEST(Init, DeterministicPerSeed) {
    auto c = small_config(10, 6, {5, 3});
    c.seed = 42;
    EXPECT_EQ(init_params(c).values, init_params(c).values);
    auto d = c;
    d.seed = 43;
    EXPECT_NE(init_params(c).values, init_params(d).values);
}

TEST(Init, XavierBoundsAndForgetBias) {
    auto c = small_config(10, 6, {5, 3});
    c.seed = 9;
    const auto p = init_params<double>(c);
    const auto& lay = p.layout;
    auto within = [&](const TensorSlot& s, std::size_t fan_in, std::size_t fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        const auto v = p.vec(s);
        EXPECT_LE(v.cwiseAbs().maxCoeff(), bound) << s.name;
        EXPECT_GT(v.cwiseAbs().maxCoeff(), 0.5 * bound) << s.name;
    };
    within(*lay.reducer_weights, 10, 6);
    EXPECT_TRUE(p.vec(*lay.reducer_bias).isZero(0));
    for (const auto& layer : lay.layers) {
        const auto H = static_cast<Eigen::Index>(layer.units);
        for (const auto& d : layer.dir) {
            within(d.input_weights, layer.input_dim, 4 * layer.units);
            within(d.recurrent_weights, layer.units, 4 * layer.units);
            const auto b = p.vec(d.bias);
            EXPECT_TRUE(b.segment(0, H).isZero(0));
            EXPECT_TRUE((b.segment(H, H).array() == 1.0).all());
            EXPECT_TRUE(b.segment(2 * H, 2 * H).isZero(0));
        }
    }
    EXPECT_EQ(p.output_bias(), 0.0);
}

TEST(Forward, ShapesAndErrors) {
    const auto p = init_params<double>(small_config(4, std::nullopt, {3, 2}));
    EXPECT_EQ(forward(p, random_input(9, 4, 1)).size(), 9);
    EXPECT_EQ(forward(p, random_input(1, 4, 1)).size(), 1);
    EXPECT_THROW(forward(p, random_input(9, 5, 1)), SchemaError);
    EXPECT_THROW(forward(p, RowMatrixd(0, 4)), InvalidArgument);
    EXPECT_THROW(backward(p, random_input(1, 4, 1), std::vector<double>{0.0}), InvalidArgument);
    EXPECT_THROW(backward(p, random_input(3, 4, 1), std::vector<double>{0.0, 1.0}), SchemaError);
}

TEST(Forward, ZeroWeightsGiveOutputBias) {
    ModelParams<double> p(small_config(4, 2, {3, 2}));
    p.output_bias() = 0.3;
    const auto y = forward(p, random_input(6, 4, 2));
    EXPECT_TRUE((y.array() == 0.3).all());
}

TEST(Forward, MatchesScalarRecurrence) {
    for (bool use_reducer : {false, true}) {
        for (bool tanh_out : {false, true}) {
            auto c = small_config(4, use_reducer ? std::optional<std::size_t>(3) : std::nullopt, {3, 2});
            c.output_tanh = tanh_out;
            c.seed = 5;
            auto p = init_params<double>(c);
            std::mt19937_64 rng(6);
            std::normal_distribution<double> nd;
            for (auto& v : p.values) v += 0.2 * nd(rng);
            const auto x = random_input(5, 4, 7);
            const Eigen::VectorXd y = forward(p, x);
            oracle::NetShape shape{4, use_reducer ? 3u : 0u, {3, 2}, tanh_out};
            const auto ref = oracle::net_forward(shape, {p.values.begin(), p.values.end()}, rows_of(x));
            for (Eigen::Index t = 0; t < y.size(); ++t) {
                EXPECT_NEAR(y(t), ref[static_cast<std::size_t>(t)], 1e-12);
            }
        }
    }
}

TEST(Forward, EveryOutputSeesTheWholeSequence) {
    auto c = small_config(3, std::nullopt, {4, 3});
    c.seed = 1;
    const auto p = init_params<double>(c);
    const auto x = random_input(12, 3, 3);
    const Eigen::VectorXd y = forward(p, x);
    auto last = x;
    last.row(11).array() += 1.0;
    auto first = x;
    first.row(0).array() += 1.0;
    EXPECT_NE(forward(p, last)(0), y(0));
    EXPECT_NE(forward(p, first)(11), y(11));
}

TEST(Forward, FloatTracksDouble) {
    auto c = small_config(6, 4, {5, 3});
    c.seed = 2;
    const auto pd = init_params<double>(c);
    const auto pf = pd.cast<float>();
    const auto x = random_input(30, 6, 4);
    const Eigen::VectorXd yd = forward(pd, x);
    const Eigen::VectorXf yf = forward(pf, RowMatrixf(x.cast<float>()));
    EXPECT_LT((yd - yf.cast<double>()).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Backward, MatchesFiniteDifferences) {
    const auto c = small_config(6, 3, {4, 3});
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = gradcheck::bptt(c, 7, seed);
        EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed;
    }
}

TEST(Backward, MatchesFiniteDifferencesWithoutReducerAndWithTanh) {
    auto c = small_config(4, std::nullopt, {3, 2, 2});
    c.output_tanh = true;
    for (std::uint64_t seed = 11; seed <= 13; ++seed) {
        EXPECT_LT(gradcheck::bptt(c, 9, seed).max_rel_error, 1e-4) << "seed " << seed;
    }
}

TEST(Backward, ConstantPredictionOnConstantGoldHasZeroGradient) {
    ModelParams<double> p(small_config(3, std::nullopt, {2}));
    p.output_bias() = 0.25;
    const std::vector<double> gold(8, 0.25);
    const auto res = backward(p, random_input(8, 3, 1), gold);
    EXPECT_EQ(res.loss, 0.0);
    for (double g : res.grad.values) EXPECT_EQ(g, 0.0);
}

TEST(Backward, LossAndOutputAgreeWithForward) {
    auto c = small_config(3, 2, {2});
    c.seed = 4;
    const auto p = init_params<double>(c);
    const auto x = random_input(10, 3, 8);
    std::vector<double> gold(10);
    for (std::size_t t = 0; t < 10; ++t) gold[t] = std::sin(0.3 * static_cast<double>(t));
    const auto res = backward(p, x, gold);
    const Eigen::VectorXd y = forward(p, x);
    EXPECT_EQ(res.output, y);
    EXPECT_DOUBLE_EQ(res.loss, ccc_loss(std::vector<double>(y.data(), y.data() + y.size()), gold));
}

TEST(Training, OverfitsOneConversation) {
    auto c = small_config(4, std::nullopt, {8, 4});
    c.seed = 3;
    auto p = init_params<float>(c);
    const RowMatrixf x = random_input(40, 4, 5).cast<float>();
    std::vector<double> gold(40);
    for (std::size_t t = 0; t < 40; ++t) gold[t] = 0.5 * std::sin(2 * std::numbers::pi * static_cast<double>(t) / 20);
    OptimState<float> opt(p.values.size(), AdamHyper{.learning_rate = 1e-2});
    double loss = 1.0;
    for (int epoch = 0; epoch < 300; ++epoch) {
        const auto res = backward(p, x, gold);
        loss = res.loss;
        adam_step(p, res.grad, opt);
    }
    EXPECT_LT(loss, 0.05);
}

// --- Adam ------------------------------------------------------------------

TEST(Adam, FirstStepMovesByLearningRate) {
    std::vector<double> w{1.0, 2.0, 3.0};
    const std::vector<double> g{0.5, -2.0, 0.0};
    OptimState<double> st(3, AdamHyper{.learning_rate = 0.1});
    adam_step<double>(w, g, st);
    EXPECT_NEAR(w[0], 0.9, 1e-6);
    EXPECT_NEAR(w[1], 2.1, 1e-6);
    EXPECT_EQ(w[2], 3.0);
    EXPECT_EQ(st.step, 1u);
}

TEST(Adam, MatchesHandComputedSecondStep) {
    std::vector<double> w{0.0};
    OptimState<double> st(1, AdamHyper{});
    adam_step<double>(w, std::vector<double>{1.0}, st);
    adam_step<double>(w, std::vector<double>{3.0}, st);
    const double m = 0.9 * 0.1 + 0.1 * 3.0;
    const double v = 0.999 * 0.001 + 0.001 * 9.0;
    const double step2 = 1e-3 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
    EXPECT_NEAR(w[0], -1e-3 * 1.0 / (1.0 + 1e-8) - step2, 1e-12);
}

TEST(Adam, SizeMismatch) {
    std::vector<double> w{1.0, 2.0};
    OptimState<double> st(2, AdamHyper{});
    EXPECT_THROW(adam_step<double>(w, std::vector<double>{1.0}, st), SchemaError);
}

// --- checkpoints -----------------------------------------------------------

namespace {
CheckpointMeta meta_for(std::size_t dim) {
    NormStats n{"mfcc-stats", Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(dim), -1, 1),
                Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), 0.5)};
    return {"mfcc-stats", "satisfaction", n};
}
}  // namespace

TEST(Checkpoint, RoundTripIsBitIdentical) {
    auto c = small_config(5, 3, {4, 2});
    c.seed = 77;
    const auto p = init_params(c);
    const auto bytes = encode_checkpoint(p, meta_for(5));
    const auto ck = decode_checkpoint(bytes);
    EXPECT_EQ(ck.params.config, c);
    EXPECT_EQ(ck.params.values, p.values);
    EXPECT_EQ(ck.meta.dimension, "satisfaction");
    ASSERT_TRUE(ck.meta.norm.has_value());
    EXPECT_EQ(ck.meta.norm->mean, meta_for(5).norm->mean);
    EXPECT_EQ(encode_checkpoint(ck.params, ck.meta), bytes);
    const RowMatrixf x = random_input(11, 5, 1).cast<float>();
    EXPECT_EQ(forward(ck.params, x), forward(p, x));
}

TEST(Checkpoint, CorruptionIsDetected) {
    const auto p = init_params(small_config(5, std::nullopt, {2}));
    const auto bytes = encode_checkpoint(p, meta_for(5));
    EXPECT_THROW(decode_checkpoint("XERM" + bytes.substr(4)), FormatError);
    for (std::size_t cut : {3ul, 11ul, 40ul, bytes.size() - 1}) {
        EXPECT_THROW(decode_checkpoint(bytes.substr(0, cut)), FormatError) << cut;
    }
    auto flipped = bytes;
    flipped[bytes.size() - 10] ^= 0x01;
    try {
        decode_checkpoint(flipped);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
    }
    EXPECT_THROW(decode_checkpoint(bytes + "x"), FormatError);
}

TEST(Checkpoint, ArchitectureMismatchOnLoad) {
    const auto dir = fs::temp_directory_path() / "emoseq_test_ckpt";
    fs::create_directories(dir);
    auto c = small_config(5, std::nullopt, {2});
    save_checkpoint(init_params(c), meta_for(5), dir / "m.serm");
    auto other = c;
    other.seed = 99;
    EXPECT_NO_THROW(load_checkpoint(dir / "m.serm", other));
    other.layer_units = {3};
    EXPECT_THROW(load_checkpoint(dir / "m.serm", other), SchemaError);
    try {
        load_checkpoint(dir / "missing.serm");
        FAIL();
    } catch (const IoError&) {
    }
    fs::remove_all(dir);
}
