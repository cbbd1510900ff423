#pragma once
// Running window of per-line statistics and the standardized model input.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "caeigs/error.hpp"
#include "caeigs/ingest.hpp"

namespace caeigs {

inline constexpr std::size_t kWindowFrames = 60;
inline constexpr std::size_t kLinePositions = 17;  // CTB rows of a 1080p frame
inline constexpr double kStdFloor = 1e-6;

// Endpoint-aligned linear interpolation onto `target` samples: output j reads
// the source at j * (L - 1) / (target - 1). A single value is broadcast.
inline std::vector<double> resample_line(std::span<const double> values, std::size_t target = kLinePositions) {
    if (values.empty()) throw Error(Errc::empty_input, "cannot resample an empty line");
    if (target == 0) throw Error(Errc::invalid_config, "resample target must be positive");
    std::vector<double> out(target);
    const std::size_t n = values.size();
    if (n == 1 || target == 1) {
        std::fill(out.begin(), out.end(), values.front());
        return out;
    }
    for (std::size_t j = 0; j < target; ++j) {
        const std::size_t num = j * (n - 1);
        const std::size_t i0 = num / (target - 1);
        const std::size_t rem = num % (target - 1);
        if (rem == 0) {
            out[j] = values[i0];
        } else {
            const double t = static_cast<double>(rem) / static_cast<double>(target - 1);
            out[j] = std::lerp(values[i0], values[i0 + 1], t);
        }
    }
    return out;
}

// 7 features x 17 positions, raw (unstandardized).
using FrameMatrix = std::array<std::array<double, kLinePositions>, kNumFeatures>;

inline FrameMatrix frame_matrix(const FrameStats& frame) {
    FrameMatrix m{};
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        const auto line = resample_line(frame.per_line[f]);
        std::copy(line.begin(), line.end(), m[f].begin());
    }
    return m;
}

// Fixed-capacity ring, oldest entry first.
class StatsWindow {
public:
    explicit StatsWindow(std::size_t capacity = kWindowFrames) : buf_(capacity) {
        if (capacity == 0) throw Error(Errc::invalid_config, "window capacity must be positive");
    }

    void push(const FrameMatrix& m) {
        buf_[(head_ + count_) % buf_.size()] = m;
        if (count_ < buf_.size()) {
            ++count_;
        } else {
            head_ = (head_ + 1) % buf_.size();
        }
    }
    void push(const FrameStats& frame) { push(frame_matrix(frame)); }

    [[nodiscard]] std::size_t size() const noexcept { return count_; }
    [[nodiscard]] std::size_t capacity() const noexcept { return buf_.size(); }
    [[nodiscard]] bool full() const noexcept { return count_ == buf_.size(); }
    void clear() noexcept { head_ = count_ = 0; }

    // t = 0 is the oldest frame.
    [[nodiscard]] const FrameMatrix& operator[](std::size_t t) const { return buf_[(head_ + t) % buf_.size()]; }

private:
    std::vector<FrameMatrix> buf_;
    std::size_t head_ = 0;
    std::size_t count_ = 0;
};

struct Normalization {
    std::array<double, kNumFeatures> mean{};
    std::array<double, kNumFeatures> std{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};

    friend bool operator==(const Normalization&, const Normalization&) = default;
};

// Per-feature mean and population std over every frame and position.
inline Normalization compute_normalization(std::span<const FrameMatrix> frames) {
    if (frames.empty()) throw Error(Errc::empty_dataset, "normalization needs at least one frame");
    Normalization norm;
    const double count = static_cast<double>(frames.size() * kLinePositions);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        double sum = 0.0;
        for (const auto& m : frames) {
            for (const double v : m[f]) sum += v;
        }
        const double mean = sum / count;
        double ss = 0.0;
        for (const auto& m : frames) {
            for (const double v : m[f]) ss += (v - mean) * (v - mean);
        }
        norm.mean[f] = mean;
        norm.std[f] = std::max(std::sqrt(ss / count), kStdFloor);
    }
    return norm;
}

// Standardized frames x features x positions tensor, oldest frame first.
class FeatureTensor {
public:
    FeatureTensor() : values_(kWindowFrames * kNumFeatures * kLinePositions, 0.0) {}

    [[nodiscard]] double& at(std::size_t t, std::size_t f, std::size_t p) {
        return values_[(t * kNumFeatures + f) * kLinePositions + p];
    }
    [[nodiscard]] double at(std::size_t t, std::size_t f, std::size_t p) const {
        return values_[(t * kNumFeatures + f) * kLinePositions + p];
    }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;

private:
    std::vector<double> values_;
};

inline FeatureTensor standardize(std::span<const FrameMatrix> frames, const Normalization& norm) {
    if (frames.size() != kWindowFrames) {
        throw Error(Errc::window_not_full, "need " + std::to_string(kWindowFrames) + " frames, have " +
                                               std::to_string(frames.size()));
    }
    FeatureTensor out;
    for (std::size_t t = 0; t < kWindowFrames; ++t) {
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            for (std::size_t p = 0; p < kLinePositions; ++p) {
                out.at(t, f, p) = (frames[t][f][p] - norm.mean[f]) / norm.std[f];
            }
        }
    }
    return out;
}

inline FeatureTensor assemble_tensor(const StatsWindow& window, const Normalization& norm) {
    if (window.size() != kWindowFrames) {
        throw Error(Errc::window_not_full, "window holds " + std::to_string(window.size()) + " of " +
                                               std::to_string(kWindowFrames) + " frames");
    }
    std::vector<FrameMatrix> frames;
    frames.reserve(kWindowFrames);
    for (std::size_t t = 0; t < kWindowFrames; ++t) frames.push_back(window[t]);
    return standardize(frames, norm);
}

}  // namespace caeigs
