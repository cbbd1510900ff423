#pragma once
// Desk-scale synthetic sessions. Each scene has a latent complexity c in [0, 1]
// that drives both the per-line encoder statistics and the scene's
// rate-quality curves, so hull switch points move with c and are learnable
// from the statistics alone.
//
// Quality model per resolution S:
//   q(R, S, c) = q_max(S) * R^k / (R^k + h(S, c)^k),  h(S, c) = h0(S) * exp(g * c)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "caeigs/detail/random.hpp"
#include "caeigs/detail/text.hpp"
#include "caeigs/domain.hpp"
#include "caeigs/error.hpp"
#include "caeigs/ingest.hpp"

namespace caeigs {

struct RqModelParams {
    double q_max = 90.0;      // VMAF ceiling
    double half_rate = 1.0;   // Mbps at which quality reaches q_max / 2 for c = 0
    double steepness = 1.2;
};

struct SyntheticConfig {
    std::uint64_t seed = 42;
    std::size_t n_scenes = 10;
    std::size_t frames_per_scene = 90;
    double complexity_low = 0.0;
    double complexity_high = 1.0;
    // 360p, 540p, 720p, 1080p
    std::array<RqModelParams, 4> rq_model_params = {{
        {70.0, 0.2, 1.2},
        {80.0, 0.3, 1.2},
        {88.0, 0.45, 1.2},
        {95.0, 0.675, 1.2},
    }};
    double complexity_gain = 2.4;        // g in h(S, c)
    double noise_level = 0.05;           // relative per-frame noise on the statistics
    double quality_noise = 0.1;          // additive VMAF noise on each RQ measurement
    double rate_noise = 0.01;            // relative measured-vs-target bitrate spread
    std::vector<double> target_bitrates = {1.0, 1.5, 2.0, 2.75, 3.5, 5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0};
    Resolution stats_resolution = Resolution::p1080;
    double fps = 60.0;
    std::string clip_id = "synthetic";
    std::vector<double> fixed_complexities;  // overrides the random draw when non-empty
};

inline void check_config(const SyntheticConfig& cfg) {
    auto fail = [](const std::string& why) { throw Error(Errc::invalid_config, why); };
    if (cfg.n_scenes == 0) fail("n_scenes must be positive");
    if (cfg.frames_per_scene < 61) fail("frames_per_scene must be >= 61 so the window can fill");
    if (!(cfg.complexity_low >= 0.0 && cfg.complexity_high <= 1.0 && cfg.complexity_low <= cfg.complexity_high)) {
        fail("complexity range must lie within [0, 1]");
    }
    if (cfg.noise_level < 0.0 || cfg.quality_noise < 0.0 || cfg.rate_noise < 0.0 || cfg.rate_noise >= 0.5) {
        fail("noise levels must be non-negative (rate noise below 0.5)");
    }
    if (cfg.target_bitrates.empty()) fail("target bitrate grid is empty");
    for (const double r : cfg.target_bitrates) {
        if (!(r > 0.0)) fail("target bitrates must be positive");
    }
    for (const auto& p : cfg.rq_model_params) {
        if (!(p.q_max > 0.0 && p.q_max <= 100.0 && p.half_rate > 0.0 && p.steepness > 0.0)) fail("bad rq model params");
    }
    if (!cfg.fixed_complexities.empty()) {
        if (cfg.fixed_complexities.size() != cfg.n_scenes) fail("fixed_complexities must have n_scenes entries");
        for (const double c : cfg.fixed_complexities) {
            if (!(c >= 0.0 && c <= 1.0)) fail("fixed complexities must lie in [0, 1]");
        }
    }
    if (cfg.stats_resolution == Resolution::p2160) fail("stats resolution must be a ladder resolution");
    if (!(cfg.fps > 0.0)) fail("fps must be positive");
}

inline double synthetic_half_rate(const SyntheticConfig& cfg, Resolution res, double complexity) {
    const auto& p = cfg.rq_model_params.at(static_cast<std::size_t>(ladder_index(res)));
    return p.half_rate * std::exp(cfg.complexity_gain * complexity);
}

// Noise-free VMAF of the synthetic model.
inline double synthetic_quality(const SyntheticConfig& cfg, double rate_mbps, Resolution res, double complexity) {
    const auto& p = cfg.rq_model_params.at(static_cast<std::size_t>(ladder_index(res)));
    const double h = synthetic_half_rate(cfg, res, complexity);
    const double rk = std::pow(rate_mbps, p.steepness);
    return p.q_max * rk / (rk + std::pow(h, p.steepness));
}

// Monotone stand-ins for the other two metrics.
inline double psnr_from_vmaf(double vmaf) { return 24.0 + 0.2 * vmaf; }
inline double ssim_from_vmaf(double vmaf) { return 1.0 - 0.25 * std::exp(-vmaf / 25.0); }

inline std::string scene_id(std::size_t scene) {
    std::string digits = std::to_string(scene);
    return "scene" + std::string(digits.size() < 5 ? 5 - digits.size() : 0, '0') + digits;
}

// Encoded frame sizes for a resolution choice. A rate-controlled encoder
// overshoots its budget more when the content is hard for that resolution at
// the given bitrate; IDR frames cost extra. Noise is keyed by frame only, so
// sizes are pointwise non-decreasing in resolution.
class SyntheticSizeModel {
public:
    SyntheticSizeModel(SyntheticConfig cfg, std::vector<double> frame_complexity)
        : cfg_(std::move(cfg)), complexity_(std::move(frame_complexity)) {}

    [[nodiscard]] std::uint64_t operator()(std::size_t frame, Resolution res, double cc_mbps, bool idr) const {
        const double c = complexity_.at(frame);
        const double budget = cc_mbps * 1e6 / 8.0 / cfg_.fps;
        const double demand = synthetic_half_rate(cfg_, res, c);
        const double overshoot = 0.7 + 0.6 * demand / (demand + cc_mbps);
        const double noise = std::exp(0.2 * detail::keyed_normal(cfg_.seed * 0x100000001b3ULL + frame));
        const double bytes = budget * overshoot * noise * (idr ? 2.5 : 1.0);
        return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(bytes)));
    }

    [[nodiscard]] std::size_t frames() const noexcept { return complexity_.size(); }

private:
    SyntheticConfig cfg_;
    std::vector<double> complexity_;
};

struct SyntheticSession {
    std::vector<FrameStats> frames;
    std::vector<RQPoint> rq_points;
    std::vector<double> complexities;  // one per scene

    [[nodiscard]] std::vector<double> frame_complexities(std::size_t frames_per_scene) const {
        std::vector<double> out;
        for (const double c : complexities) out.insert(out.end(), frames_per_scene, c);
        return out;
    }
};

namespace detail {

inline FrameStats synth_frame(const SyntheticConfig& cfg, double c, std::uint64_t index, bool scene_change,
                              Rng& rng) {
    FrameStats f;
    f.frame_index = index;
    f.scene_change = scene_change;
    f.encoded_resolution = cfg.stats_resolution;
    const std::size_t rows = ctb_rows(cfg.stats_resolution);
    const double blocks = static_cast<double>(width(cfg.stats_resolution)) / 64.0;
    for (auto& line : f.per_line) line.resize(rows);
    auto jitter = [&]() { return 1.0 + cfg.noise_level * normal(rng); };
    for (std::size_t i = 0; i < rows; ++i) {
        const double u = rows > 1 ? static_cast<double>(i) / static_cast<double>(rows - 1) : 0.0;
        const double profile = 0.75 + 0.5 * u;  // more detail towards the bottom rows
        const double intra = std::max(0.0, blocks * (0.05 + 0.25 * c) * jitter());
        const double skip = std::max(0.0, blocks * 0.7 * (1.0 - c) * jitter());
        const double inter = std::max(0.0, blocks - intra - skip);
        f.per_line[kIntraBlocks][i] = intra;
        f.per_line[kInterBlocks][i] = inter;
        f.per_line[kSkipBlocks][i] = skip;
        f.per_line[kAverageSatd][i] = std::max(0.0, (400.0 + 4000.0 * c) * profile * jitter());
        const double centre = 24.0 + 12.0 * c;
        const double spread = (2.0 + 10.0 * c) * std::max(0.0, jitter());
        const double lo = std::clamp(centre - spread / 2.0, 0.0, 51.0);
        const double hi = std::clamp(centre + spread / 2.0, lo, 51.0);
        f.per_line[kMinQp][i] = lo;
        f.per_line[kMaxQp][i] = hi;
        f.per_line[kMotionType][i] = (1.0 + 2.0 * c) * jitter();
    }
    return f;
}

}  // namespace detail

// Deterministic in cfg.seed. Scene s spans frames [s * F, (s + 1) * F) and its
// first frame carries the scene-change flag.
inline SyntheticSession generate_synthetic_session(const SyntheticConfig& cfg) {
    check_config(cfg);
    detail::Rng rng(cfg.seed);
    SyntheticSession session;
    for (std::size_t s = 0; s < cfg.n_scenes; ++s) {
        const double drawn = detail::uniform(rng, cfg.complexity_low, cfg.complexity_high);
        session.complexities.push_back(cfg.fixed_complexities.empty() ? drawn : cfg.fixed_complexities[s]);
    }
    const SyntheticSizeModel sizes(cfg, session.frame_complexities(cfg.frames_per_scene));
    for (std::size_t s = 0; s < cfg.n_scenes; ++s) {
        const double c = session.complexities[s];
        for (std::size_t k = 0; k < cfg.frames_per_scene; ++k) {
            const std::uint64_t index = s * cfg.frames_per_scene + k;
            auto f = detail::synth_frame(cfg, c, index, k == 0, rng);
            // Encoded at the stats resolution against a nominal 10 Mbps budget.
            f.frame_size = sizes(static_cast<std::size_t>(index), cfg.stats_resolution, 10.0, k == 0);
            session.frames.push_back(std::move(f));
        }
        for (const auto res : kLadderResolutions) {
            for (const double target : cfg.target_bitrates) {
                RQPoint p;
                p.clip_id = cfg.clip_id;
                p.scene_id = scene_id(s);
                p.resolution = res;
                p.target_bitrate = target;
                p.measured_bitrate = target * (1.0 + cfg.rate_noise * std::clamp(detail::normal(rng), -3.0, 3.0));
                const double vmaf = synthetic_quality(cfg, p.measured_bitrate, res, c) + cfg.quality_noise * detail::normal(rng);
                p.quality.vmaf = std::clamp(vmaf, 0.0, 100.0);
                p.quality.psnr_y = psnr_from_vmaf(p.quality.vmaf);
                p.quality.ssim_yb = ssim_from_vmaf(p.quality.vmaf);
                session.rq_points.push_back(std::move(p));
            }
        }
    }
    return session;
}

// Piecewise-constant congestion-control bitrate: a log-uniform level in
// [low, high] held for a random 0.5-4 s run, one value per frame.
inline std::vector<double> generate_cc_trace(std::uint64_t seed, std::size_t n_frames, double low_mbps, double high_mbps,
                                             double fps = 60.0) {
    if (!(low_mbps > 0.0 && high_mbps >= low_mbps)) throw Error(Errc::invalid_config, "bad cc trace range");
    detail::Rng rng(seed);
    std::vector<double> trace;
    trace.reserve(n_frames);
    while (trace.size() < n_frames) {
        const double level = std::exp(detail::uniform(rng, std::log(low_mbps), std::log(high_mbps)));
        const auto run = static_cast<std::size_t>(detail::uniform(rng, 0.5, 4.0) * fps);
        for (std::size_t i = 0; i < std::max<std::size_t>(run, 1) && trace.size() < n_frames; ++i) trace.push_back(level);
    }
    return trace;
}

}  // namespace caeigs
