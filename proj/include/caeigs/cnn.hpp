#pragma once
// Zone classifier: a stack of same-length Conv1D layers with LeakyReLU,
// a single-channel output conv, global average pooling and a sigmoid.
//
// Everything here is double precision; inference cost for the default
// 60 -> 32 -> 32 -> 32 -> 1 stack is about 1.4 M multiply-adds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "caeigs/detail/random.hpp"
#include "caeigs/error.hpp"
#include "caeigs/features.hpp"

namespace caeigs {

// channels x length, row-major.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    [[nodiscard]] double* row(std::size_t r) noexcept { return data.data() + r * cols; }
    [[nodiscard]] const double* row(std::size_t r) const noexcept { return data.data() + r * cols; }
    [[nodiscard]] double& operator()(std::size_t r, std::size_t c) noexcept { return data[r * cols + c]; }
    [[nodiscard]] double operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct ConvLayer {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_size = 1;
    std::vector<double> weights;  // [out][in][kernel]
    std::vector<double> bias;     // [out]

    static ConvLayer zeros(std::size_t in, std::size_t out, std::size_t kernel) {
        return {in, out, kernel, std::vector<double>(out * in * kernel, 0.0), std::vector<double>(out, 0.0)};
    }

    [[nodiscard]] double& w(std::size_t o, std::size_t c, std::size_t j) noexcept {
        return weights[(o * in_channels + c) * kernel_size + j];
    }
    [[nodiscard]] double w(std::size_t o, std::size_t c, std::size_t j) const noexcept {
        return weights[(o * in_channels + c) * kernel_size + j];
    }

    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct ConvNet {
    std::vector<ConvLayer> layers;
    double leaky_slope = 0.01;

    [[nodiscard]] std::size_t parameter_count() const noexcept {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weights.size() + l.bias.size();
        return n;
    }

    friend bool operator==(const ConvNet&, const ConvNet&) = default;
};

inline void check_network(const ConvNet& net) {
    if (net.layers.empty()) throw Error(Errc::shape_mismatch, "network has no layers");
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        const std::string tag = "layer " + std::to_string(i) + ": ";
        if (l.in_channels == 0 || l.out_channels == 0) throw Error(Errc::shape_mismatch, tag + "zero channels");
        if (l.kernel_size % 2 == 0) throw Error(Errc::shape_mismatch, tag + "kernel size must be odd");
        if (l.weights.size() != l.out_channels * l.in_channels * l.kernel_size) {
            throw Error(Errc::shape_mismatch, tag + "weight count does not match declared shape");
        }
        if (l.bias.size() != l.out_channels) throw Error(Errc::shape_mismatch, tag + "bias count mismatch");
        if (i + 1 < net.layers.size() && l.out_channels != net.layers[i + 1].in_channels) {
            throw Error(Errc::shape_mismatch, tag + "out_channels does not feed the next layer");
        }
    }
    if (net.layers.back().out_channels != 1) throw Error(Errc::shape_mismatch, "final layer must have one output channel");
}

// How the 60 x 7 x 17 tensor is laid out for Conv1D.
enum class Layout : std::uint8_t {
    frames_as_channels = 0,    // 60 channels, length 119 (feature-major 7 x 17)
    features_as_channels = 1,  // 119 channels, length 60
};

inline constexpr std::size_t kFlatFeatures = kNumFeatures * kLinePositions;

constexpr std::pair<std::size_t, std::size_t> input_shape(Layout layout) noexcept {
    return layout == Layout::frames_as_channels ? std::pair{kWindowFrames, kFlatFeatures}
                                                : std::pair{kFlatFeatures, kWindowFrames};
}

struct WeightBundle {
    ConvNet net;
    Layout layout = Layout::frames_as_channels;
    Normalization normalization;
    int zone_id = 0;
    double threshold = 0.5;

    friend bool operator==(const WeightBundle&, const WeightBundle&) = default;
};

inline void check_bundle(const WeightBundle& b) {
    check_network(b.net);
    const auto [channels, length] = input_shape(b.layout);
    if (b.net.layers.front().in_channels != channels) {
        throw Error(Errc::shape_mismatch, "first layer expects " + std::to_string(b.net.layers.front().in_channels) +
                                              " channels but layout provides " + std::to_string(channels));
    }
    if (!(b.threshold > 0.0 && b.threshold < 1.0)) throw Error(Errc::shape_mismatch, "threshold must lie in (0, 1)");
    if (b.zone_id < 0 || b.zone_id > 3) throw Error(Errc::shape_mismatch, "zone id must be 0..3");
    for (const double s : b.normalization.std) {
        if (!(s > 0.0)) throw Error(Errc::shape_mismatch, "normalization std must be positive");
    }
}

inline Matrix flatten_input(const FeatureTensor& tensor, Layout layout) {
    const auto [rows, cols] = input_shape(layout);
    Matrix m(rows, cols);
    for (std::size_t t = 0; t < kWindowFrames; ++t) {
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            for (std::size_t p = 0; p < kLinePositions; ++p) {
                const std::size_t flat = f * kLinePositions + p;
                if (layout == Layout::frames_as_channels) {
                    m(t, flat) = tensor.at(t, f, p);
                } else {
                    m(flat, t) = tensor.at(t, f, p);
                }
            }
        }
    }
    return m;
}

// Stride-1 cross-correlation with (kernel - 1) / 2 zero padding on each side.
inline Matrix conv1d_forward(const Matrix& in, const ConvLayer& layer) {
    if (in.rows != layer.in_channels) {
        throw Error(Errc::channel_mismatch, "input has " + std::to_string(in.rows) + " channels, layer expects " +
                                                std::to_string(layer.in_channels));
    }
    const std::size_t len = in.cols;
    const auto pad = static_cast<std::ptrdiff_t>(layer.kernel_size / 2);
    Matrix out(layer.out_channels, len);
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
        double* dst = out.row(o);
        std::fill(dst, dst + len, layer.bias[o]);
        for (std::size_t c = 0; c < layer.in_channels; ++c) {
            const double* src = in.row(c);
            for (std::size_t j = 0; j < layer.kernel_size; ++j) {
                const double wv = layer.w(o, c, j);
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
                const std::size_t lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                const std::size_t hi = shift > 0 ? len - std::min<std::size_t>(len, static_cast<std::size_t>(shift)) : len;
                for (std::size_t i = lo; i < hi; ++i) dst[i] += wv * src[static_cast<std::ptrdiff_t>(i) + shift];
            }
        }
    }
    return out;
}

inline void leaky_relu_inplace(std::span<double> x, double slope) noexcept {
    for (double& v : x) v = v >= 0.0 ? v : slope * v;
}

inline std::vector<double> leaky_relu(std::span<const double> x, double slope) {
    std::vector<double> out(x.begin(), x.end());
    leaky_relu_inplace(out, slope);
    return out;
}

inline double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Pre-sigmoid score: mean over the length axis of the final conv output.
inline double forward_logit(const ConvNet& net, const Matrix& input) {
    Matrix act = input;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        act = conv1d_forward(act, net.layers[l]);
        if (l + 1 < net.layers.size()) leaky_relu_inplace(act.data, net.leaky_slope);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < act.cols; ++i) sum += act(0, i);
    return sum / static_cast<double>(act.cols);
}

inline double forward(const ConvNet& net, const Matrix& input) { return sigmoid(forward_logit(net, input)); }

inline double forward(const WeightBundle& bundle, const FeatureTensor& tensor) {
    return forward(bundle.net, flatten_input(tensor, bundle.layout));
}

// Ties go to the higher-resolution candidate.
constexpr int decide(double probability, double threshold = 0.5) noexcept { return probability >= threshold ? 1 : 0; }

inline int predict(const WeightBundle& bundle, const FeatureTensor& tensor) {
    return decide(forward(bundle, tensor), bundle.threshold);
}

inline constexpr double kBceEpsilon = 1e-7;

inline double bce_loss(double prediction, int label) {
    const double p = std::clamp(prediction, kBceEpsilon, 1.0 - kBceEpsilon);
    return label != 0 ? -std::log(p) : -std::log1p(-p);
}

struct TrainingBatch {
    std::vector<std::reference_wrapper<const Matrix>> inputs;
    std::vector<int> labels;
};

struct Gradients {
    std::vector<ConvLayer> layers;  // same shapes as the network
    double loss = 0.0;              // mean BCE over the batch
};

inline Gradients zero_gradients(const ConvNet& net) {
    Gradients g;
    for (const auto& l : net.layers) g.layers.push_back(ConvLayer::zeros(l.in_channels, l.out_channels, l.kernel_size));
    return g;
}

namespace detail {

// Four interleaved partial sums; fixed order, so results are reproducible.
inline double dot(const double* a, const double* b, std::size_t n) noexcept {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

// Accumulates weight/bias gradients of one layer and, when grad_in is
// non-null, the gradient with respect to the layer input.
inline void conv1d_backward(const Matrix& in, const ConvLayer& layer, const Matrix& grad_out, ConvLayer& grad,
                            Matrix* grad_in) {
    const std::size_t len = in.cols;
    const auto pad = static_cast<std::ptrdiff_t>(layer.kernel_size / 2);
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
        const double* g = grad_out.row(o);
        double bsum = 0.0;
        for (std::size_t i = 0; i < len; ++i) bsum += g[i];
        grad.bias[o] += bsum;
        for (std::size_t c = 0; c < layer.in_channels; ++c) {
            const double* src = in.row(c);
            double* dst = grad_in ? grad_in->row(c) : nullptr;
            for (std::size_t j = 0; j < layer.kernel_size; ++j) {
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
                const std::size_t lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                const std::size_t hi = shift > 0 ? len - std::min<std::size_t>(len, static_cast<std::size_t>(shift)) : len;
                grad.w(o, c, j) += dot(g + lo, src + static_cast<std::ptrdiff_t>(lo) + shift, hi - lo);
                if (dst) {
                    const double wv = layer.w(o, c, j);
                    for (std::size_t i = lo; i < hi; ++i) dst[static_cast<std::ptrdiff_t>(i) + shift] += wv * g[i];
                }
            }
        }
    }
}

// Adds d(loss)/d(params) * scale for one example into `acc`; returns the loss.
inline double backprop_example(const ConvNet& net, const Matrix& input, int label, double scale, Gradients& acc) {
    const std::size_t n_layers = net.layers.size();
    std::vector<Matrix> pre(n_layers);   // conv outputs
    std::vector<Matrix> post(n_layers);  // activations fed to the next layer
    const Matrix* act = &input;
    for (std::size_t l = 0; l < n_layers; ++l) {
        pre[l] = conv1d_forward(*act, net.layers[l]);
        if (l + 1 < n_layers) {
            post[l] = pre[l];
            leaky_relu_inplace(post[l].data, net.leaky_slope);
            act = &post[l];
        }
    }
    const Matrix& out = pre.back();
    const std::size_t len = out.cols;
    double sum = 0.0;
    for (std::size_t i = 0; i < len; ++i) sum += out(0, i);
    const double p = sigmoid(sum / static_cast<double>(len));
    const double loss = bce_loss(p, label);

    // The clamp makes the loss flat outside [eps, 1 - eps].
    const bool clamped = p < kBceEpsilon || p > 1.0 - kBceEpsilon;
    const double dz = clamped ? 0.0 : p - static_cast<double>(label);

    Matrix grad(1, len, dz * scale / static_cast<double>(len));
    for (std::size_t l = n_layers; l-- > 0;) {
        const Matrix& layer_in = l == 0 ? input : post[l - 1];
        if (l == 0) {
            conv1d_backward(layer_in, net.layers[l], grad, acc.layers[l], nullptr);
            break;
        }
        Matrix grad_in(layer_in.rows, layer_in.cols);
        conv1d_backward(layer_in, net.layers[l], grad, acc.layers[l], &grad_in);
        const Matrix& z = pre[l - 1];
        for (std::size_t k = 0; k < grad_in.data.size(); ++k) {
            if (z.data[k] < 0.0) grad_in.data[k] *= net.leaky_slope;
        }
        grad = std::move(grad_in);
    }
    return loss;
}

}  // namespace detail

// Exact gradients of the mean BCE over the batch.
inline Gradients backward(const ConvNet& net, const TrainingBatch& batch) {
    if (batch.inputs.empty()) throw Error(Errc::empty_dataset, "batch is empty");
    if (batch.inputs.size() != batch.labels.size()) throw Error(Errc::shape_mismatch, "inputs and labels differ in count");
    Gradients g = zero_gradients(net);
    const double scale = 1.0 / static_cast<double>(batch.inputs.size());
    double total = 0.0;
    for (std::size_t b = 0; b < batch.inputs.size(); ++b) {
        const Matrix& x = batch.inputs[b];
        if (x.rows != net.layers.front().in_channels) {
            throw Error(Errc::shape_mismatch, "input " + std::to_string(b) + " has " + std::to_string(x.rows) +
                                                  " channels, network expects " +
                                                  std::to_string(net.layers.front().in_channels));
        }
        total += detail::backprop_example(net, x, batch.labels[b], scale, g);
    }
    g.loss = total * scale;
    return g;
}

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Gradients m;
    Gradients v;
    std::uint64_t step = 0;

    static AdamState for_network(const ConvNet& net) { return {zero_gradients(net), zero_gradients(net), 0}; }
};

namespace detail {

inline void adam_update(std::span<double> w, std::span<const double> g, std::span<double> m, std::span<double> v,
                        const AdamHyper& h, double bc1, double bc2) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        w[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
}

}  // namespace detail

// Bias-corrected Adam; state must start from AdamState::for_network.
inline void adam_step(ConvNet& net, const Gradients& grads, AdamState& state, const AdamHyper& hyper = {}) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        detail::adam_update(layer.weights, grads.layers[l].weights, state.m.layers[l].weights,
                            state.v.layers[l].weights, hyper, bc1, bc2);
        detail::adam_update(layer.bias, grads.layers[l].bias, state.m.layers[l].bias, state.v.layers[l].bias, hyper,
                            bc1, bc2);
    }
}

// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
// numeric being the central difference of the single-example loss.
inline double grad_check(const ConvNet& net, const Matrix& input, int label, double eps = 1e-4) {
    TrainingBatch batch{{std::cref(input)}, {label}};
    const Gradients analytic = backward(net, batch);
    ConvNet probe = net;
    double worst = 0.0;
    auto compare = [&](double& param, double a) {
        const double saved = param;
        param = saved + eps;
        const double up = bce_loss(forward(probe, input), label);
        param = saved - eps;
        const double down = bce_loss(forward(probe, input), label);
        param = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(a - numeric) / denom);
    };
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        for (std::size_t k = 0; k < probe.layers[l].weights.size(); ++k) {
            compare(probe.layers[l].weights[k], analytic.layers[l].weights[k]);
        }
        for (std::size_t k = 0; k < probe.layers[l].bias.size(); ++k) {
            compare(probe.layers[l].bias[k], analytic.layers[l].bias[k]);
        }
    }
    return worst;
}

struct Architecture {
    std::vector<std::size_t> hidden_channels = {32, 32, 32};
    std::size_t kernel_size = 3;
    double leaky_slope = 0.01;
};

// Uniform in +-sqrt(1 / (in_channels * kernel)) for weights and biases alike.
inline ConvNet init_network(std::size_t in_channels, const Architecture& arch, std::uint64_t seed) {
    detail::Rng rng(seed);
    ConvNet net;
    net.leaky_slope = arch.leaky_slope;
    std::size_t in = in_channels;
    auto widths = arch.hidden_channels;
    widths.push_back(1);
    for (const std::size_t out : widths) {
        auto layer = ConvLayer::zeros(in, out, arch.kernel_size);
        const double bound = std::sqrt(1.0 / static_cast<double>(in * arch.kernel_size));
        for (double& w : layer.weights) w = detail::uniform(rng, -bound, bound);
        for (double& b : layer.bias) b = detail::uniform(rng, -bound, bound);
        net.layers.push_back(std::move(layer));
        in = out;
    }
    check_network(net);
    return net;
}

struct Dataset {
    std::vector<FeatureTensor> inputs;
    std::vector<int> labels;
};

struct TrainConfig {
    Architecture arch;
    std::size_t iterations = 5000;
    std::size_t batch_size = 64;
    AdamHyper adam;
    double validation_fraction = 0.1;
    std::size_t eval_interval = 100;
    Layout layout = Layout::frames_as_channels;
    Normalization normalization;  // stored in the bundle; inputs arrive standardized
    int zone_id = 0;
    double threshold = 0.5;
};

struct TrainResult {
    WeightBundle bundle;                                    // best validation checkpoint
    std::vector<double> loss_history;                       // mean batch loss per iteration
    std::vector<std::pair<std::size_t, double>> validation;  // (iteration, loss)
    std::size_t best_iteration = 0;
};

inline double mean_loss(const ConvNet& net, std::span<const Matrix> inputs, std::span<const int> labels,
                        std::span<const std::size_t> idx) {
    double total = 0.0;
    for (const auto i : idx) total += bce_loss(forward(net, inputs[i]), labels[i]);
    return idx.empty() ? 0.0 : total / static_cast<double>(idx.size());
}

// Single-threaded and deterministic in `seed`.
inline TrainResult train(const Dataset& data, const TrainConfig& cfg, std::uint64_t seed) {
    if (data.inputs.empty()) throw Error(Errc::empty_dataset, "training set is empty");
    if (data.inputs.size() != data.labels.size()) throw Error(Errc::shape_mismatch, "inputs and labels differ in count");
    std::size_t positives = 0;
    for (const int y : data.labels) {
        if (y != 0 && y != 1) throw Error(Errc::invalid_config, "labels must be 0 or 1");
        positives += static_cast<std::size_t>(y);
    }
    if (positives == 0 || positives == data.labels.size()) {
        throw Error(Errc::single_class_dataset, "training set holds a single class");
    }
    if (cfg.batch_size == 0) throw Error(Errc::invalid_config, "batch size must be positive");

    std::vector<Matrix> inputs;
    inputs.reserve(data.inputs.size());
    for (const auto& t : data.inputs) inputs.push_back(flatten_input(t, cfg.layout));

    detail::Rng rng(seed);
    const auto [channels, length] = input_shape(cfg.layout);
    (void)length;

    TrainResult result;
    result.bundle.net = init_network(channels, cfg.arch, rng());
    result.bundle.layout = cfg.layout;
    result.bundle.normalization = cfg.normalization;
    result.bundle.zone_id = cfg.zone_id;
    result.bundle.threshold = cfg.threshold;
    check_bundle(result.bundle);

    std::vector<std::size_t> order(inputs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    detail::shuffle(order, rng);
    std::size_t n_val = 0;
    if (cfg.validation_fraction > 0.0 && order.size() >= 2) {
        n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(order.size())));
        n_val = std::clamp<std::size_t>(n_val, 1, order.size() - 1);
    }
    const std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

    if (cfg.iterations == 0) return result;

    ConvNet net = result.bundle.net;
    AdamState adam = AdamState::for_network(net);
    double best = std::numeric_limits<double>::infinity();
    auto checkpoint = [&](std::size_t iter) {
        if (val_idx.empty()) return;
        const double loss = mean_loss(net, inputs, data.labels, val_idx);
        result.validation.emplace_back(iter, loss);
        if (loss < best) {
            best = loss;
            result.bundle.net = net;
            result.best_iteration = iter;
        }
    };
    checkpoint(0);

    std::vector<std::size_t> perm = train_idx;
    detail::shuffle(perm, rng);
    std::size_t cursor = 0;
    const std::size_t batch = std::min(cfg.batch_size, perm.size());
    TrainingBatch tb;
    tb.inputs.reserve(batch);
    tb.labels.reserve(batch);
    for (std::size_t iter = 1; iter <= cfg.iterations; ++iter) {
        tb.inputs.clear();
        tb.labels.clear();
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor == perm.size()) {
                detail::shuffle(perm, rng);
                cursor = 0;
            }
            const std::size_t i = perm[cursor++];
            tb.inputs.emplace_back(inputs[i]);
            tb.labels.push_back(data.labels[i]);
        }
        const Gradients g = backward(net, tb);
        result.loss_history.push_back(g.loss);
        adam_step(net, g, adam, cfg.adam);
        if (iter % std::max<std::size_t>(cfg.eval_interval, 1) == 0 || iter == cfg.iterations) checkpoint(iter);
    }
    if (val_idx.empty()) {
        result.bundle.net = net;
        result.best_iteration = cfg.iterations;
    }
    return result;
}

}  // namespace caeigs
