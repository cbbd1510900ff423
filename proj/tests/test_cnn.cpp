#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

#include "caeigs/cnn.hpp"
#include "caeigs/detail/random.hpp"

using namespace caeigs;

namespace {

Matrix random_matrix(detail::Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = detail::uniform(rng, -scale, scale);
    return m;
}

// Explicitly padded cross-correlation, written independently of the library loop.
Matrix conv_oracle(const Matrix& in, const ConvLayer& layer) {
    const std::size_t pad = layer.kernel_size / 2;
    Matrix padded(in.rows, in.cols + 2 * pad);
    for (std::size_t c = 0; c < in.rows; ++c) {
        for (std::size_t i = 0; i < in.cols; ++i) padded(c, i + pad) = in(c, i);
    }
    Matrix out(layer.out_channels, in.cols);
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
        for (std::size_t i = 0; i < in.cols; ++i) {
            double s = layer.bias[o];
            for (std::size_t c = 0; c < in.rows; ++c) {
                for (std::size_t j = 0; j < layer.kernel_size; ++j) s += layer.w(o, c, j) * padded(c, i + j);
            }
            out(o, i) = s;
        }
    }
    return out;
}

ConvNet random_net(detail::Rng& rng, std::size_t in, std::size_t layers, std::size_t max_width) {
    Architecture arch;
    arch.hidden_channels.clear();
    for (std::size_t l = 0; l + 1 < layers; ++l) arch.hidden_channels.push_back(1 + detail::uniform_index(rng, max_width));
    arch.kernel_size = detail::uniform01(rng) < 0.5 ? 3 : 1;
    return init_network(in, arch, rng());
}

FeatureTensor random_tensor(detail::Rng& rng) {
    FeatureTensor t;
    for (std::size_t i = 0; i < kWindowFrames; ++i) {
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            for (std::size_t p = 0; p < kLinePositions; ++p) t.at(i, f, p) = detail::normal(rng);
        }
    }
    return t;
}

WeightBundle default_bundle(std::uint64_t seed, Layout layout = Layout::frames_as_channels) {
    WeightBundle b;
    b.layout = layout;
    b.net = init_network(input_shape(layout).first, Architecture{}, seed);
    return b;
}

}  // namespace

TEST(FlattenInput, FramesAsChannelsIndexing) {
    FeatureTensor t;
    t.at(3, 2, 5) = 4.25;
    const Matrix m = flatten_input(t, Layout::frames_as_channels);
    EXPECT_EQ(m.rows, 60u);
    EXPECT_EQ(m.cols, 119u);
    EXPECT_EQ(m(3, 39), 4.25);
    EXPECT_EQ(std::count(m.data.begin(), m.data.end(), 0.0), static_cast<long>(m.data.size() - 1));
    const Matrix zero = flatten_input(FeatureTensor{}, Layout::frames_as_channels);
    for (const double v : zero.data) EXPECT_EQ(v, 0.0);
}

TEST(FlattenInput, LayoutsAreTransposes) {
    detail::Rng rng(1);
    const auto t = random_tensor(rng);
    const Matrix a = flatten_input(t, Layout::frames_as_channels);
    const Matrix b = flatten_input(t, Layout::features_as_channels);
    ASSERT_EQ(b.rows, 119u);
    ASSERT_EQ(b.cols, 60u);
    for (std::size_t r = 0; r < a.rows; ++r) {
        for (std::size_t c = 0; c < a.cols; ++c) EXPECT_EQ(a(r, c), b(c, r));
    }
}

TEST(Conv1d, HandExample) {
    auto layer = ConvLayer::zeros(1, 1, 3);
    layer.weights = {1.0, 0.0, -1.0};
    Matrix in(1, 3);
    in.data = {1.0, 2.0, 3.0};
    EXPECT_EQ(conv1d_forward(in, layer).data, (std::vector<double>{-2.0, -2.0, 2.0}));
}

TEST(Conv1d, IdentityAndBias) {
    detail::Rng rng(2);
    auto id = ConvLayer::zeros(1, 1, 3);
    id.weights = {0.0, 1.0, 0.0};
    const Matrix in = random_matrix(rng, 1, 11);
    EXPECT_EQ(conv1d_forward(in, id), in);
    auto bias = ConvLayer::zeros(3, 2, 5);
    bias.bias = {1.5, -2.0};
    const Matrix out = conv1d_forward(random_matrix(rng, 3, 7), bias);
    for (std::size_t i = 0; i < 7; ++i) {
        EXPECT_EQ(out(0, i), 1.5);
        EXPECT_EQ(out(1, i), -2.0);
    }
}

TEST(Conv1d, MatchesOracleOnRandomShapes) {
    detail::Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t in = 1 + detail::uniform_index(rng, 6);
        const std::size_t out = 1 + detail::uniform_index(rng, 6);
        const std::size_t k = 1 + 2 * detail::uniform_index(rng, 3);
        const std::size_t len = 1 + detail::uniform_index(rng, 12);
        auto layer = ConvLayer::zeros(in, out, k);
        for (double& w : layer.weights) w = detail::uniform(rng, -1.0, 1.0);
        for (double& b : layer.bias) b = detail::uniform(rng, -1.0, 1.0);
        const Matrix x = random_matrix(rng, in, len);
        const Matrix got = conv1d_forward(x, layer);
        const Matrix ref = conv_oracle(x, layer);
        ASSERT_EQ(got.rows, out);
        ASSERT_EQ(got.cols, len);
        for (std::size_t i = 0; i < got.data.size(); ++i) EXPECT_NEAR(got.data[i], ref.data[i], 1e-12);
    }
}

TEST(Conv1d, ChannelMismatch) {
    try {
        (void)conv1d_forward(Matrix(2, 5), ConvLayer::zeros(3, 1, 3));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::channel_mismatch);
    }
}

TEST(LeakyRelu, Definition) {
    const std::vector<double> x = {2.0, -1.0, 0.0};
    const auto y = leaky_relu(x, 0.01);
    EXPECT_EQ(y[0], 2.0);
    EXPECT_EQ(y[1], -0.01);
    EXPECT_EQ(y[2], 0.0);
    EXPECT_EQ(leaky_relu(std::vector<double>{0.0}, 0.3)[0], 0.0);
}

TEST(Forward, ZeroNetworkGivesHalf) {
    WeightBundle b = default_bundle(1);
    for (auto& l : b.net.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    detail::Rng rng(4);
    EXPECT_EQ(forward(b, random_tensor(rng)), 0.5);
    EXPECT_EQ(predict(b, random_tensor(rng)), 1);
}

TEST(Forward, HandTracedMiniature) {
    // 2 channels x length 4 -> conv(k=3) to 1 channel -> leaky -> conv(k=1) -> mean -> sigmoid.
    ConvNet net;
    net.leaky_slope = 0.01;
    auto l1 = ConvLayer::zeros(2, 1, 3);
    l1.weights = {1.0, 0.0, -1.0, 0.5, 0.5, 0.5};
    l1.bias = {0.1};
    auto l2 = ConvLayer::zeros(1, 1, 1);
    l2.weights = {2.0};
    l2.bias = {-0.5};
    net.layers = {l1, l2};
    Matrix x(2, 4);
    x.data = {1.0, -1.0, 2.0, 0.0, 0.5, 1.0, -2.0, 1.0};
    // Layer 1 pre-activations: [1.85, -1.15, -0.9, 1.6]; after LeakyReLU: [1.85, -0.0115, -0.009, 1.6].
    // Layer 2: [3.2, -0.523, -0.518, 2.7]; mean 1.21475.
    EXPECT_NEAR(forward_logit(net, x), 1.21475, 1e-12);
    EXPECT_NEAR(forward(net, x), 0.7711383275447334, 1e-12);
}

TEST(Forward, OutputInOpenIntervalAndShapesPreserved) {
    detail::Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const ConvNet net = random_net(rng, 4, 1 + detail::uniform_index(rng, 4), 6);
        const Matrix x = random_matrix(rng, 4, 1 + detail::uniform_index(rng, 20), 3.0);
        Matrix act = x;
        for (const auto& l : net.layers) {
            act = conv1d_forward(act, l);
            EXPECT_EQ(act.cols, x.cols);
        }
        const double p = forward(net, x);
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
    }
}

TEST(Predict, ThresholdRule) {
    EXPECT_EQ(decide(0.7), 1);
    EXPECT_EQ(decide(0.3), 0);
    EXPECT_EQ(decide(0.5), 1);
    EXPECT_EQ(decide(std::nextafter(0.5, 0.0)), 0);
    EXPECT_EQ(decide(0.6, 0.65), 0);
}

TEST(Predict, FlipsExactlyAtThresholdCrossing) {
    // The final bias shifts the logit; the label flips when the probability crosses 0.5.
    detail::Rng rng(6);
    WeightBundle b = default_bundle(6);
    const auto t = random_tensor(rng);
    const double base = forward_logit(b.net, flatten_input(t, b.layout));
    for (const double delta : {-0.2, -0.01, 0.01, 0.2}) {
        WeightBundle shifted = b;
        shifted.net.layers.back().bias[0] += -base + delta;
        EXPECT_EQ(predict(shifted, t), delta >= 0.0 ? 1 : 0) << delta;
    }
}

TEST(BceLoss, Values) {
    EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-15);
    EXPECT_NEAR(bce_loss(0.5, 0), 0.693147, 1e-6);
    EXPECT_NEAR(bce_loss(1.0, 1), 1e-7, 1e-12);
    EXPECT_NEAR(bce_loss(0.0, 0), 1e-7, 1e-12);
    EXPECT_NEAR(bce_loss(0.0, 1), -std::log(1e-7), 1e-9);
}

TEST(Backward, FinalBiasGradientIsPMinusY) {
    detail::Rng rng(7);
    const ConvNet net = random_net(rng, 3, 3, 5);
    const Matrix x = random_matrix(rng, 3, 9);
    for (const int y : {0, 1}) {
        const Gradients g = backward(net, TrainingBatch{{std::cref(x)}, {y}});
        EXPECT_NEAR(g.layers.back().bias[0], forward(net, x) - y, 1e-12);
        EXPECT_NEAR(g.loss, bce_loss(forward(net, x), y), 1e-12);
    }
}

TEST(Backward, ZeroInputGivesZeroFirstLayerWeightGradients) {
    detail::Rng rng(8);
    const ConvNet net = random_net(rng, 3, 3, 5);
    const Matrix zero(3, 8);
    const Gradients g = backward(net, TrainingBatch{{std::cref(zero)}, {1}});
    for (const double w : g.layers.front().weights) EXPECT_EQ(w, 0.0);
    double bias_mass = 0.0;
    for (const auto& l : g.layers) {
        for (const double b : l.bias) bias_mass += std::abs(b);
    }
    EXPECT_GT(bias_mass, 0.0);
}

TEST(Backward, DuplicateExampleSameAsOnce) {
    detail::Rng rng(9);
    const ConvNet net = random_net(rng, 2, 3, 4);
    const Matrix x = random_matrix(rng, 2, 6);
    const Gradients once = backward(net, TrainingBatch{{std::cref(x)}, {1}});
    const Gradients twice = backward(net, TrainingBatch{{std::cref(x), std::cref(x)}, {1, 1}});
    for (std::size_t l = 0; l < once.layers.size(); ++l) {
        for (std::size_t k = 0; k < once.layers[l].weights.size(); ++k) {
            EXPECT_NEAR(once.layers[l].weights[k], twice.layers[l].weights[k], 1e-14);
        }
    }
    EXPECT_NEAR(once.loss, twice.loss, 1e-15);
}

TEST(Backward, Errors) {
    detail::Rng rng(10);
    const ConvNet net = random_net(rng, 2, 2, 3);
    try {
        (void)backward(net, TrainingBatch{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::empty_dataset);
    }
    const Matrix wrong(3, 4);
    try {
        (void)backward(net, TrainingBatch{{std::cref(wrong)}, {0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::shape_mismatch);
    }
}

TEST(GradCheck, RandomMiniatureNetworks) {
    detail::Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const ConvNet net = random_net(rng, 1 + detail::uniform_index(rng, 8), 1 + detail::uniform_index(rng, 3), 8);
        const Matrix x = random_matrix(rng, net.layers.front().in_channels, 2 + detail::uniform_index(rng, 10));
        EXPECT_LT(grad_check(net, x, static_cast<int>(trial % 2)), 1e-4) << trial;
    }
}

TEST(GradCheck, LinearNetworkNearMachinePrecision) {
    detail::Rng rng(12);
    ConvNet net = random_net(rng, 3, 3, 4);
    net.leaky_slope = 1.0;
    const Matrix x = random_matrix(rng, 3, 7);
    EXPECT_LT(grad_check(net, x, 1), 1e-7);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    ConvNet net;
    net.layers = {ConvLayer::zeros(1, 1, 1)};
    net.layers[0].weights = {0.3};
    net.layers[0].bias = {-0.2};
    Gradients g = zero_gradients(net);
    g.layers[0].weights = {0.7};
    g.layers[0].bias = {-1.4};
    AdamState st = AdamState::for_network(net);
    adam_step(net, g, st);
    // Step 1: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
    EXPECT_NEAR(net.layers[0].weights[0], 0.3 - 1e-3 * 0.7 / (0.7 + 1e-8), 1e-15);
    EXPECT_NEAR(net.layers[0].bias[0], -0.2 + 1e-3 * 1.4 / (1.4 + 1e-8), 1e-15);
    EXPECT_NEAR(0.3 - net.layers[0].weights[0], net.layers[0].bias[0] + 0.2, 1e-11);
}

TEST(Adam, ZeroGradientLeavesWeights) {
    detail::Rng rng(13);
    ConvNet net = random_net(rng, 2, 2, 3);
    const ConvNet before = net;
    AdamState st = AdamState::for_network(net);
    const Gradients g = zero_gradients(net);
    for (int i = 0; i < 10; ++i) adam_step(net, g, st);
    EXPECT_EQ(net, before);
}

TEST(InitNetwork, ShapesAndBounds) {
    const ConvNet net = init_network(60, Architecture{}, 1);
    ASSERT_EQ(net.layers.size(), 4u);
    EXPECT_EQ(net.layers[0].in_channels, 60u);
    EXPECT_EQ(net.layers[0].out_channels, 32u);
    EXPECT_EQ(net.layers[3].out_channels, 1u);
    for (const auto& l : net.layers) {
        const double bound = std::sqrt(1.0 / static_cast<double>(l.in_channels * l.kernel_size));
        for (const double w : l.weights) EXPECT_LE(std::abs(w), bound);
        for (const double b : l.bias) EXPECT_LE(std::abs(b), bound);
    }
    EXPECT_EQ(init_network(60, Architecture{}, 1), net);
    EXPECT_NE(init_network(60, Architecture{}, 2), net);
}

TEST(CheckBundle, Invariants) {
    WeightBundle b = default_bundle(1);
    EXPECT_NO_THROW(check_bundle(b));
    WeightBundle wrong_layout = b;
    wrong_layout.layout = Layout::features_as_channels;
    EXPECT_THROW(check_bundle(wrong_layout), Error);
    WeightBundle bad_threshold = b;
    bad_threshold.threshold = 1.0;
    EXPECT_THROW(check_bundle(bad_threshold), Error);
    WeightBundle two_outputs = b;
    two_outputs.net.layers.back() = ConvLayer::zeros(32, 2, 3);
    EXPECT_THROW(check_bundle(two_outputs), Error);
    EXPECT_NO_THROW(check_bundle(default_bundle(1, Layout::features_as_channels)));
}

namespace {

// Two well-separated Gaussian blobs in tensor space.
Dataset blob_dataset(std::uint64_t seed, std::size_t n) {
    detail::Rng rng(seed);
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        FeatureTensor t;
        for (std::size_t k = 0; k < kWindowFrames; ++k) {
            for (std::size_t f = 0; f < kNumFeatures; ++f) {
                for (std::size_t p = 0; p < kLinePositions; ++p) {
                    t.at(k, f, p) = 0.5 * detail::normal(rng) + (f == kAverageSatd ? (y ? 0.8 : -0.8) : 0.0);
                }
            }
        }
        d.inputs.push_back(t);
        d.labels.push_back(y);
    }
    return d;
}

TrainConfig small_config(std::size_t iterations) {
    TrainConfig cfg;
    cfg.arch.hidden_channels = {4, 4};
    cfg.iterations = iterations;
    cfg.batch_size = 8;
    cfg.eval_interval = 10;
    return cfg;
}

}  // namespace

TEST(Train, ZeroIterationsReturnsInitialWeights) {
    const Dataset d = blob_dataset(1, 20);
    const auto r = train(d, small_config(0), 5);
    EXPECT_TRUE(r.loss_history.empty());
    EXPECT_EQ(r.best_iteration, 0u);
    detail::Rng rng(5);
    EXPECT_EQ(r.bundle.net, init_network(60, small_config(0).arch, rng()));
}

TEST(Train, DeterministicInSeed) {
    const Dataset d = blob_dataset(2, 24);
    const auto a = train(d, small_config(15), 9);
    const auto b = train(d, small_config(15), 9);
    EXPECT_EQ(a.bundle, b.bundle);
    EXPECT_EQ(a.loss_history, b.loss_history);
    EXPECT_NE(train(d, small_config(15), 10).bundle, a.bundle);
}

TEST(Train, LearnsSeparableBlobsAndLossFalls) {
    const Dataset d = blob_dataset(3, 80);
    const auto r = train(d, small_config(100), 1);
    ASSERT_EQ(r.loss_history.size(), 100u);
    const double first = std::accumulate(r.loss_history.begin(), r.loss_history.begin() + 10, 0.0);
    const double last = std::accumulate(r.loss_history.end() - 10, r.loss_history.end(), 0.0);
    EXPECT_LT(last, first);
    const Dataset holdout = blob_dataset(4, 40);
    int correct = 0;
    for (std::size_t i = 0; i < holdout.inputs.size(); ++i) correct += predict(r.bundle, holdout.inputs[i]) == holdout.labels[i];
    EXPECT_GE(correct, 38);
}

TEST(Train, Errors) {
    Dataset single = blob_dataset(5, 6);
    for (int& y : single.labels) y = 1;
    try {
        (void)train(single, small_config(1), 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::single_class_dataset);
    }
    try {
        (void)train(Dataset{}, small_config(1), 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::empty_dataset);
    }
}

TEST(Forward, LatencyOfDefaultNetwork) {
    detail::Rng rng(14);
    const WeightBundle b = default_bundle(3);
    const auto t = random_tensor(rng);
    volatile double sink = 0.0;
    std::vector<double> ms;
    for (int i = 0; i < 50; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        sink = sink + forward(b, t);
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(ms.begin(), ms.begin() + 25, ms.end());
    EXPECT_LT(ms[25], 5.0);
}
