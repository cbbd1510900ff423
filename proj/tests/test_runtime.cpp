#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <sstream>

#include "caeigs/runtime.hpp"
#include "caeigs/synthetic.hpp"

using namespace caeigs;

namespace {

std::vector<FrameStats> plain_frames(std::size_t n, std::uint64_t seed = 1) {
    SyntheticConfig cfg;
    cfg.seed = seed;
    cfg.n_scenes = 1;
    cfg.frames_per_scene = std::max<std::size_t>(n, 61);
    auto frames = generate_synthetic_session(cfg).frames;
    frames.resize(n);
    for (auto& f : frames) f.scene_change = false;
    return frames;
}

// Constant classifier for one zone that outputs probability p.
std::shared_ptr<const BundleSet> constant_probability(int zone, double p) {
    auto set = std::make_shared<BundleSet>(static_mimic_bundles(default_zone_table()));
    auto b = constant_bundle(zone, 1);
    b.net.layers.back().bias[0] = std::log(p / (1.0 - p));
    set->insert_or_assign(zone, b);
    return set;
}

SyntheticSizeModel flat_sizes(std::size_t n, double complexity = 0.5) {
    return SyntheticSizeModel(SyntheticConfig{}, std::vector<double>(n, complexity));
}

}  // namespace

TEST(OnFrame, SceneChangeWithFullWindowUsesClassifier) {
    SessionEngine engine(default_zone_table(), CaePolicy{constant_probability(2, 0.8)}, Resolution::p720);
    auto frames = plain_frames(60);
    frames.back().scene_change = true;
    for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
        const auto d = engine.on_frame(frames[i], 7.5);
        EXPECT_FALSE(d.idr);
        EXPECT_EQ(d.source, DecisionSource::unchanged);
    }
    const auto d = engine.on_frame(frames.back(), 7.5);
    EXPECT_EQ(d.resolution, Resolution::p1080);
    EXPECT_TRUE(d.idr);
    EXPECT_EQ(d.source, DecisionSource::cae);
    EXPECT_EQ(d.zone_id, 2);
    ASSERT_TRUE(d.probability);
    EXPECT_NEAR(*d.probability, 0.8, 1e-12);
    EXPECT_EQ(engine.current_resolution(), Resolution::p1080);
}

TEST(OnFrame, OrdinaryFrameKeepsResolution) {
    SessionEngine engine(default_zone_table(), StaticPolicy{}, Resolution::p720);
    const auto d = engine.on_frame(plain_frames(1).front(), 15.0);
    EXPECT_EQ(d.resolution, Resolution::p720);
    EXPECT_FALSE(d.idr);
    EXPECT_EQ(d.source, DecisionSource::unchanged);
    EXPECT_FALSE(d.probability);
    EXPECT_EQ(d.zone_id, -1);
}

TEST(OnFrame, ColdStartFallsBackToStatic) {
    SessionEngine engine(default_zone_table(), CaePolicy{constant_probability(2, 0.8)}, Resolution::p360);
    auto frames = plain_frames(30);
    frames.back().scene_change = true;
    Decision last;
    for (const auto& f : frames) last = engine.on_frame(f, 7.5);
    EXPECT_EQ(last.source, DecisionSource::static_fallback);
    EXPECT_EQ(last.resolution, Resolution::p720);
    EXPECT_TRUE(last.idr);
    EXPECT_FALSE(last.probability);
}

TEST(OnFrame, MissingBundle) {
    auto set = std::make_shared<BundleSet>();
    set->emplace(0, constant_bundle(0, 1));
    SessionEngine engine(default_zone_table(), CaePolicy{set}, Resolution::p360);
    auto f = plain_frames(1).front();
    f.scene_change = true;
    try {
        (void)engine.on_frame(f, 12.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::missing_bundle);
    }
}

TEST(OnFrame, RejectsInvalidFrameAndClampsBitrate) {
    SessionEngine engine(default_zone_table(), StaticPolicy{}, Resolution::p720);
    auto bad = plain_frames(1).front();
    bad.per_line[kMinQp][0] = 50.0;
    bad.per_line[kMaxQp][0] = 10.0;
    try {
        (void)engine.on_frame(bad, 5.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invariant_violation);
    }
    auto f = plain_frames(2).back();
    f.scene_change = true;
    const auto d = engine.on_frame(f, 45.0);
    EXPECT_TRUE(d.clamped);
    EXPECT_EQ(d.zone_id, 3);
    EXPECT_EQ(d.resolution, Resolution::p1080);
}

TEST(OnFrame, OraclePolicyReadsSceneLabels) {
    SessionEngine engine(default_zone_table(), OraclePolicy{{{0, 0, 0, 0}, {1, 1, 1, 1}}}, Resolution::p720);
    auto f = plain_frames(3);
    f[0].scene_change = f[1].scene_change = f[2].scene_change = true;
    EXPECT_EQ(engine.on_frame(f[0], 3.0).resolution, Resolution::p540);
    EXPECT_EQ(engine.on_frame(f[1], 3.0).resolution, Resolution::p720);
    EXPECT_THROW((void)engine.on_frame(f[2], 3.0), Error);
}

TEST(StaticPolicy, TableValues) {
    const auto zones = default_zone_table();
    EXPECT_EQ(static_policy(zones.zones[0]), Resolution::p360);
    EXPECT_EQ(static_policy(zones.zones[3]), Resolution::p1080);
    for (std::size_t i = 1; i < zones.zones.size(); ++i) {
        EXPECT_LE(static_policy(zones.zones[i - 1]), static_policy(zones.zones[i]));
    }
}

TEST(StepChannel, SteadyStateHasNoDrops) {
    ChannelModel m;
    m.fps = 50.0;  // 25000 bytes per interval
    const auto drain = static_cast<std::uint64_t>(m.drain_bytes());
    ASSERT_EQ(static_cast<double>(drain), m.drain_bytes());
    for (int i = 0; i < 500; ++i) EXPECT_EQ(step_channel(m, drain), FrameOutcome::delivered);
    EXPECT_EQ(m.dropped, 0u);
    EXPECT_EQ(m.queue_bytes, 0.0);
}

TEST(StepChannel, OversizedFrameDropped) {
    ChannelModel m;
    EXPECT_EQ(step_channel(m, static_cast<std::uint64_t>(10.0 * m.drain_bytes())), FrameOutcome::dropped);
    EXPECT_EQ(m.dropped, 1u);
    EXPECT_EQ(m.queue_bytes, 0.0);
    EXPECT_EQ(m.drop_percent(), 100.0);
    // Exactly at the threshold is still admitted.
    ChannelModel edge;
    edge.fps = 50.0;
    EXPECT_EQ(step_channel(edge, static_cast<std::uint64_t>(2.0 * edge.drain_bytes())), FrameOutcome::delivered);
    EXPECT_EQ(edge.queue_bytes, edge.drain_bytes());
}

TEST(StepChannel, DropsNonIncreasingInCapacity) {
    detail::Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::uint64_t> sizes(400);
        for (auto& s : sizes) s = static_cast<std::uint64_t>(detail::uniform(rng, 0.0, 60000.0));
        std::uint64_t prev = std::numeric_limits<std::uint64_t>::max();
        for (double cap = 2.0; cap <= 30.0; cap += 2.0) {
            ChannelModel m;
            m.capacity_mbps = cap;
            for (const auto s : sizes) step_channel(m, s);
            EXPECT_LE(m.dropped, prev);
            prev = m.dropped;
        }
    }
}

TEST(SimulateSession, DeterministicAndOneIdrPerScene) {
    SyntheticConfig cfg;
    cfg.n_scenes = 3;
    cfg.frames_per_scene = 80;
    const auto s = generate_synthetic_session(cfg);
    const auto cc = generate_cc_trace(9, s.frames.size(), 1.5, 20.0);
    const SyntheticSizeModel sizes(cfg, s.frame_complexities(cfg.frames_per_scene));
    const auto zones = default_zone_table();
    const Policy cae = CaePolicy{std::make_shared<const BundleSet>(static_mimic_bundles(zones))};
    const auto a = simulate_session(s.frames, cc, zones, cae, ChannelModel{}, sizes);
    const auto b = simulate_session(s.frames, cc, zones, cae, ChannelModel{}, sizes);
    EXPECT_EQ(a, b);
    std::size_t idr = 0;
    for (const auto& f : a.frames) idr += f.decision.idr;
    EXPECT_EQ(idr, 3u);
    EXPECT_EQ(a.scene_frames, (std::vector<std::size_t>{0, 80, 160}));
    EXPECT_EQ(a.delivered + a.dropped, 240u);
    std::ostringstream log;
    write_decision_log(log, a);
    EXPECT_EQ(log.str().substr(0, log.str().find('\n')),
              "frame_index,cc_mbps,zone,resolution,idr,source,probability,frame_size_bytes,outcome");
}

TEST(SimulateSession, LengthMismatch) {
    const auto frames = plain_frames(10);
    const std::vector<double> cc(9, 5.0);
    try {
        (void)simulate_session(frames, cc, default_zone_table(), StaticPolicy{}, ChannelModel{}, flat_sizes(10));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::stream_length_mismatch);
    }
}

TEST(SimulateSession, StaticMimicBundlesEqualStaticPolicy) {
    const auto zones = default_zone_table();
    const Policy mimic = CaePolicy{std::make_shared<const BundleSet>(static_mimic_bundles(zones))};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SyntheticConfig cfg;
        cfg.seed = seed;
        cfg.n_scenes = 6;
        cfg.frames_per_scene = 70;
        const auto s = generate_synthetic_session(cfg);
        const auto cc = generate_cc_trace(seed, s.frames.size(), 1.0, 25.0);
        const SyntheticSizeModel sizes(cfg, s.frame_complexities(cfg.frames_per_scene));
        const auto a = simulate_session(s.frames, cc, zones, mimic, ChannelModel{}, sizes);
        const auto b = simulate_session(s.frames, cc, zones, StaticPolicy{}, ChannelModel{}, sizes);
        ASSERT_EQ(a.frames.size(), b.frames.size());
        for (std::size_t i = 0; i < a.frames.size(); ++i) {
            EXPECT_EQ(a.frames[i].decision.resolution, b.frames[i].decision.resolution) << i;
            EXPECT_EQ(a.frames[i].frame_size, b.frames[i].frame_size) << i;
            EXPECT_EQ(a.frames[i].outcome, b.frames[i].outcome) << i;
        }
        EXPECT_EQ(a.dropped, b.dropped);
    }
}

TEST(SimulateSession, LowerResolutionsAtLowBitrateDropNoMore) {
    const auto zones = default_zone_table();
    SyntheticConfig cfg;
    cfg.n_scenes = 8;
    cfg.frames_per_scene = 90;
    cfg.complexity_low = 0.8;
    const auto s = generate_synthetic_session(cfg);
    const std::vector<double> cc(s.frames.size(), 3.0);
    const SyntheticSizeModel sizes(cfg, s.frame_complexities(cfg.frames_per_scene));
    BundleSet low;
    for (const auto& z : zones.zones) low.emplace(z.id, constant_bundle(z.id, 0));
    const auto cae = simulate_session(s.frames, cc, zones, CaePolicy{std::make_shared<const BundleSet>(low)},
                                      ChannelModel{}, sizes);
    const auto stat = simulate_session(s.frames, cc, zones, StaticPolicy{}, ChannelModel{}, sizes);
    EXPECT_LE(cae.drop_percent(), stat.drop_percent());
}

TEST(SimulateSession, SafetyInvariantsOnRandomSessions) {
    const auto zones = default_zone_table();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SyntheticConfig cfg;
        cfg.seed = seed;
        cfg.n_scenes = 5;
        cfg.frames_per_scene = 61 + seed * 3;
        const auto s = generate_synthetic_session(cfg);
        const auto cc = generate_cc_trace(seed + 100, s.frames.size(), 1.0, 22.0);
        const SyntheticSizeModel sizes(cfg, s.frame_complexities(cfg.frames_per_scene));
        const Policy p = CaePolicy{constant_probability(static_cast<int>(seed % 4), 0.3 + 0.1 * static_cast<double>(seed % 5))};
        const auto r = simulate_session(s.frames, cc, zones, p, ChannelModel{}, sizes);
        for (std::size_t i = 0; i < r.frames.size(); ++i) {
            const auto& d = r.frames[i].decision;
            EXPECT_EQ(d.idr, s.frames[i].scene_change);
            if (i > 0 && !s.frames[i].scene_change) {
                EXPECT_EQ(d.resolution, r.frames[i - 1].decision.resolution);
            }
            if (d.source == DecisionSource::cae) {
                EXPECT_TRUE(zones.zones[static_cast<std::size_t>(d.zone_id)].in_pair(d.resolution));
            }
        }
    }
}

TEST(SessionSummary, Format) {
    SyntheticConfig cfg;
    cfg.n_scenes = 2;
    const auto s = generate_synthetic_session(cfg);
    const std::vector<double> cc(s.frames.size(), 8.0);
    const SyntheticSizeModel sizes(cfg, s.frame_complexities(cfg.frames_per_scene));
    const auto r = simulate_session(s.frames, cc, default_zone_table(), StaticPolicy{}, ChannelModel{}, sizes);
    std::ostringstream out;
    write_session_summary(out, r);
    std::istringstream in(out.str());
    std::string first, header, row;
    std::getline(in, first);
    std::getline(in, header);
    std::getline(in, row);
    EXPECT_EQ(first.rfind("# frames=180 ", 0), 0u);
    EXPECT_EQ(header, "scene,frame_index,cc_mbps,zone,resolution,source,probability,clamped");
    EXPECT_EQ(row, "0,0,8.000000,2,720p,static_ladder,,0");
}
