#include <gflowss/error.hpp>
#include <gflowss/fourier_mlp.hpp>

#include "test_oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace gflowss;
using gflowss::testing::central_diff;
using gflowss::testing::naive_forward;
using gflowss::testing::rel_error;

namespace {

NetworkConfig small_cfg(std::uint64_t seed) {
    NetworkConfig cfg;
    cfg.input_dim = 5;
    cfg.hidden_widths = {10};
    cfg.output_dim = 5;
    cfg.fourier_std = 1.0;
    cfg.seed = seed;
    return cfg;
}

std::vector<double*> all_params(NetworkParams& p) {
    std::vector<double*> out;
    for (auto& l : p.layers) {
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) out.push_back(l.weight.data() + i);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) out.push_back(l.bias.data() + i);
    }
    return out;
}

} // namespace

TEST(FourierMlp, InitShapes) {
    NetworkConfig cfg;
    cfg.input_dim = 100;
    cfg.output_dim = 100;
    cfg.seed = 7;
    const auto p = init_network(cfg);
    ASSERT_EQ(p.layers.size(), 3u);
    EXPECT_EQ(p.layers[0].weight.rows(), 150);
    EXPECT_EQ(p.layers[0].weight.cols(), 100);
    EXPECT_EQ(p.layers[1].weight.rows(), 150);
    EXPECT_EQ(p.layers[1].weight.cols(), 150);
    EXPECT_EQ(p.layers[2].weight.rows(), 100);
    EXPECT_EQ(p.layers[2].weight.cols(), 150);
    EXPECT_EQ(p.parameter_count(), 150u * 100 + 150 + 150 * 150 + 150 + 100 * 150 + 100);
}

TEST(FourierMlp, InitDeterministic) {
    NetworkConfig cfg;
    cfg.input_dim = 20;
    cfg.output_dim = 4;
    cfg.seed = 7;
    const auto a = init_network(cfg);
    const auto b = init_network(cfg);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        EXPECT_EQ(a.layers[l].weight, b.layers[l].weight);
        EXPECT_EQ(a.layers[l].bias, b.layers[l].bias);
    }
    cfg.seed = 8;
    EXPECT_NE(init_network(cfg).layers[0].weight, a.layers[0].weight);
}

TEST(FourierMlp, FourierStdMatches) {
    NetworkConfig cfg;
    cfg.input_dim = 100;
    cfg.output_dim = 100;
    cfg.fourier_std = 0.1;
    cfg.seed = 3;
    const auto p = init_network(cfg);
    const auto& w = p.layers[0].weight;
    ASSERT_GE(w.size(), 10000);
    const double mean = w.mean();
    const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size() - 1);
    EXPECT_NEAR(std::sqrt(var), 0.1, 0.005);
}

TEST(FourierMlp, ConfigValidation) {
    NetworkConfig cfg;
    cfg.input_dim = 0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg.input_dim = 1;
    cfg.hidden_widths = {};
    EXPECT_THROW(cfg.validate(), Error);
    cfg.hidden_widths = {4};
    cfg.fourier_std = -1.0;
    EXPECT_THROW(cfg.validate(), Error);
}

TEST(FourierMlp, ZeroFirstLayerGivesFinalBias) {
    auto p = init_network(small_cfg(1));
    p.layers[0].weight.setZero();
    p.layers[0].bias.setZero();
    p.layers[1].bias.setRandom();
    const Eigen::VectorXd x = Eigen::VectorXd::Random(5);
    const auto y = forward(p, x);
    for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(y(i), p.layers[1].bias(i));
}

TEST(FourierMlp, ZeroInputIgnoresFourierWeights) {
    auto p = init_network(small_cfg(2));
    p.layers[0].bias.setRandom();
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(5);
    ForwardTape tape;
    forward_batch(p, x, &tape);
    const Eigen::VectorXd first = tape.preactivations[0].col(0).array().sin();
    EXPECT_TRUE(first.isApprox(p.layers[0].bias.array().sin().matrix()));
    const auto y1 = forward(p, x);
    p.layers[0].weight.setRandom();
    EXPECT_EQ(forward(p, x), y1);
}

TEST(FourierMlp, ForwardMatchesStraightLine) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        NetworkConfig cfg;
        cfg.input_dim = 3 + rng() % 6;
        cfg.hidden_widths = {4 + rng() % 10, 4 + rng() % 10};
        cfg.output_dim = 1 + rng() % 5;
        cfg.fourier_std = 0.7;
        cfg.seed = rng();
        const auto p = init_network(cfg);
        const Eigen::VectorXd x = Eigen::VectorXd::Random(static_cast<Eigen::Index>(cfg.input_dim));
        const auto got = forward(p, x);
        const auto want = naive_forward(p, std::vector<double>(x.data(), x.data() + x.size()));
        for (std::size_t i = 0; i < want.size(); ++i)
            EXPECT_LE(rel_error(got(static_cast<Eigen::Index>(i)), want[i], 1e-300), 1e-12);
    }
}

TEST(FourierMlp, BatchEqualsColumns) {
    const auto p = init_network(small_cfg(9));
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 4);
    const auto y = forward_batch(p, x);
    for (Eigen::Index j = 0; j < 4; ++j) EXPECT_TRUE(y.col(j).isApprox(forward(p, x.col(j)), 1e-14));
}

TEST(FourierMlp, ZeroOutGradGivesZeroGrads) {
    const auto p = init_network(small_cfg(3));
    const auto g = backward(p, Eigen::VectorXd::Random(5), Eigen::VectorXd::Zero(5));
    for (const auto& l : g.layers) {
        EXPECT_EQ(l.weight.cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(FourierMlp, LastLayerGradientIsInputOuterProduct) {
    // The final affine layer is linear in its weight: dy_i/dW_ij = h_j.
    const auto p = init_network(small_cfg(4));
    const Eigen::VectorXd x = Eigen::VectorXd::Random(5);
    ForwardTape tape;
    forward_batch(p, x, &tape);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(5);
    e(2) = 1.0;
    const auto g = backward(p, tape, e);
    const Eigen::VectorXd h = tape.inputs.back().col(0);
    for (Eigen::Index j = 0; j < h.size(); ++j) EXPECT_DOUBLE_EQ(g.layers.back().weight(2, j), h(j));
    EXPECT_DOUBLE_EQ(g.layers.back().weight(1, 0), 0.0);
}

TEST(FourierMlp, BackpropMatchesFiniteDifferences) {
    auto p = init_network(small_cfg(21));
    const Eigen::VectorXd x = Eigen::VectorXd::Random(5);
    const Eigen::VectorXd w = Eigen::VectorXd::Random(5);
    Eigen::VectorXd gx;
    const auto g = backward(p, x, w, &gx);
    auto grads = g;
    auto params = all_params(p);
    auto gvals = all_params(grads);
    auto f = [&] { return w.dot(forward(p, x)); };
    for (std::size_t i = 0; i < params.size(); ++i)
        EXPECT_LE(rel_error(*gvals[i], central_diff(*params[i], f), 1e-7), 1e-4) << "param " << i;
    Eigen::VectorXd xv = x;
    for (Eigen::Index i = 0; i < 5; ++i) {
        auto fx = [&] { return w.dot(forward(p, xv)); };
        EXPECT_LE(rel_error(gx(i), central_diff(xv(i), fx), 1e-7), 1e-4);
    }
}

TEST(FourierMlp, AdamZeroGradLeavesParams) {
    auto p = init_network(small_cfg(6));
    const auto before = p;
    auto st = AdamState::for_params(p, 0.1);
    adam_step(p, p.zeros_like(), st);
    for (std::size_t l = 0; l < p.layers.size(); ++l) EXPECT_EQ(p.layers[l].weight, before.layers[l].weight);
}

TEST(FourierMlp, AdamFirstStepHandValue) {
    NetworkParams p;
    p.config.input_dim = 1;
    p.config.hidden_widths = {};
    p.config.output_dim = 1;
    p.layers.push_back({Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1)});
    auto g = p.zeros_like();
    g.layers[0].weight(0, 0) = 1.0;
    auto st = AdamState::for_params(p, 0.1);
    adam_step(p, g, st);
    EXPECT_EQ(st.t, 1u);
    EXPECT_NEAR(p.layers[0].weight(0, 0), 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(FourierMlp, AdamRejectsNonFinite) {
    auto p = init_network(small_cfg(6));
    const auto before = p;
    auto st = AdamState::for_params(p, 0.1);
    auto g = p.zeros_like();
    g.layers[1].bias(0) = std::nan("");
    try {
        adam_step(p, g, st);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteGradient);
    }
    EXPECT_EQ(st.t, 0u);
    EXPECT_EQ(p.layers[1].bias, before.layers[1].bias);
}

TEST(FourierMlp, AdamRunsAreBitIdentical) {
    auto run = [] {
        auto p = init_network(small_cfg(30));
        auto st = AdamState::for_params(p, 0.01);
        std::mt19937_64 rng(4);
        std::normal_distribution<double> nd;
        for (int t = 0; t < 50; ++t) {
            Eigen::VectorXd x(5), w(5);
            for (int i = 0; i < 5; ++i) x(i) = nd(rng), w(i) = nd(rng);
            adam_step(p, backward(p, x, w), st);
        }
        return p;
    };
    const auto a = run();
    const auto b = run();
    for (std::size_t l = 0; l < a.layers.size(); ++l) EXPECT_EQ(a.layers[l].weight, b.layers[l].weight);
}

TEST(FourierMlp, CheckpointRoundTrip) {
    const auto p = init_network(small_cfg(12));
    const auto path = std::filesystem::temp_directory_path() / "gflowss_mlp_roundtrip.json";
    save_checkpoint(p, path);
    const auto q = load_checkpoint(path);
    std::filesystem::remove(path);
    EXPECT_EQ(q.config.seed, p.config.seed);
    EXPECT_EQ(q.config.hidden_widths, p.config.hidden_widths);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        EXPECT_EQ(q.layers[l].weight, p.layers[l].weight);
        EXPECT_EQ(q.layers[l].bias, p.layers[l].bias);
    }
    auto j = to_json(p);
    j["format"] = "something-else";
    EXPECT_THROW(network_from_json(j), Error);
}
