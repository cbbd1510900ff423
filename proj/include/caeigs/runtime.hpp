#pragma once
// Online engine: one resolution decision per scene change, plus a sender-side
// leaky-bucket channel for frame-drop accounting.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "caeigs/cnn.hpp"
#include "caeigs/detail/text.hpp"
#include "caeigs/domain.hpp"
#include "caeigs/error.hpp"
#include "caeigs/features.hpp"
#include "caeigs/ingest.hpp"

namespace caeigs {

using BundleSet = std::map<int, WeightBundle>;  // keyed by zone id

enum class DecisionSource : std::uint8_t { cae, static_fallback, unchanged, static_ladder, oracle };

constexpr std::string_view to_string(DecisionSource s) noexcept {
    switch (s) {
        case DecisionSource::cae: return "cae";
        case DecisionSource::static_fallback: return "static_fallback";
        case DecisionSource::unchanged: return "unchanged";
        case DecisionSource::static_ladder: return "static_ladder";
        case DecisionSource::oracle: return "oracle";
    }
    return "?";
}

struct Decision {
    std::uint64_t frame_index = 0;
    Resolution resolution = Resolution::p1080;
    bool idr = false;
    DecisionSource source = DecisionSource::unchanged;
    std::optional<double> probability;
    int zone_id = -1;       // -1 when no zone was consulted
    bool clamped = false;   // CC bitrate fell outside the zone table

    friend bool operator==(const Decision&, const Decision&) = default;
};

inline Resolution static_policy(const Zone& zone) noexcept { return zone.static_resolution; }

struct StaticPolicy {};
struct CaePolicy {
    std::shared_ptr<const BundleSet> bundles;
};
// Precomputed labels, one row per scene in stream order, one label per zone
// position in the zone table.
struct OraclePolicy {
    std::vector<std::vector<int>> labels;
};
using Policy = std::variant<StaticPolicy, CaePolicy, OraclePolicy>;

// Single-writer per stream; bundles and zones are shared read-only.
class SessionEngine {
public:
    SessionEngine(ZoneTable zones, Policy policy, Resolution initial)
        : zones_(std::move(zones)), policy_(std::move(policy)), current_(initial) {
        if (const auto problems = validate_zone_table(zones_); !problems.empty()) {
            throw Error(Errc::invalid_config, "zone table: " + problems.front());
        }
    }

    Decision on_frame(const FrameStats& frame, double cc_mbps) {
        if (const auto problem = check_frame(frame); !problem.empty()) {
            throw Error(Errc::invariant_violation, "frame " + std::to_string(frame.frame_index) + ": " + problem);
        }
        window_.push(frame);
        Decision d{frame.frame_index, current_, false, DecisionSource::unchanged, std::nullopt, -1, false};
        if (frame.scene_change) {
            const ZoneMatch match = zone_for_bitrate(zones_, cc_mbps);
            d.idr = true;
            d.zone_id = match.zone.id;
            d.clamped = match.clamped;
            decide_scene(match.zone, d);
            current_ = d.resolution;
            ++scenes_;
        }
        return d;
    }

    [[nodiscard]] Resolution current_resolution() const noexcept { return current_; }
    [[nodiscard]] const StatsWindow& window() const noexcept { return window_; }
    [[nodiscard]] const ZoneTable& zones() const noexcept { return zones_; }
    [[nodiscard]] std::size_t scenes_seen() const noexcept { return scenes_; }

private:
    void decide_scene(const Zone& zone, Decision& d) const {
        if (std::holds_alternative<StaticPolicy>(policy_)) {
            d.resolution = static_policy(zone);
            d.source = DecisionSource::static_ladder;
        } else if (const auto* oracle = std::get_if<OraclePolicy>(&policy_)) {
            if (scenes_ >= oracle->labels.size()) {
                throw Error(Errc::stream_length_mismatch, "oracle has labels for " + std::to_string(oracle->labels.size()) + " scenes");
            }
            d.resolution = zone.candidate(oracle->labels[scenes_].at(zone_position(zone)));
            d.source = DecisionSource::oracle;
        } else {
            const auto& bundles = std::get<CaePolicy>(policy_).bundles;
            if (!bundles || !bundles->contains(zone.id)) {
                throw Error(Errc::missing_bundle, "no weights for zone " + std::to_string(zone.id));
            }
            if (!window_.full()) {
                d.resolution = static_policy(zone);
                d.source = DecisionSource::static_fallback;
                return;
            }
            const WeightBundle& b = bundles->at(zone.id);
            const double p = forward(b, assemble_tensor(window_, b.normalization));
            d.probability = p;
            d.resolution = zone.candidate(decide(p, b.threshold));
            d.source = DecisionSource::cae;
        }
    }

    [[nodiscard]] std::size_t zone_position(const Zone& zone) const {
        for (std::size_t i = 0; i < zones_.zones.size(); ++i) {
            if (zones_.zones[i].id == zone.id) return i;
        }
        return 0;
    }

    ZoneTable zones_;
    Policy policy_;
    StatsWindow window_;
    Resolution current_;
    std::size_t scenes_ = 0;
};

// Classifier whose output is a constant: a zero network with a final bias of
// +-20 (probability ~1 or ~0).
inline WeightBundle constant_bundle(int zone_id, int label, Layout layout = Layout::frames_as_channels,
                                    const Architecture& arch = {}) {
    WeightBundle b;
    b.layout = layout;
    b.zone_id = zone_id;
    b.net.leaky_slope = arch.leaky_slope;
    std::size_t in = input_shape(layout).first;
    auto widths = arch.hidden_channels;
    widths.push_back(1);
    for (const std::size_t out : widths) {
        b.net.layers.push_back(ConvLayer::zeros(in, out, arch.kernel_size));
        in = out;
    }
    b.net.layers.back().bias[0] = label != 0 ? 20.0 : -20.0;
    check_bundle(b);
    return b;
}

// Bundles that reproduce the static ladder through the CAE path.
inline BundleSet static_mimic_bundles(const ZoneTable& zones) {
    BundleSet set;
    for (const auto& z : zones.zones) set.emplace(z.id, constant_bundle(z.id, z.static_resolution == z.candidate_high ? 1 : 0));
    return set;
}

struct ChannelModel {
    double capacity_mbps = 10.0;
    double fps = 60.0;
    double queue_bytes = 0.0;
    double drop_threshold = 2.0;  // frame intervals of queued delay
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;

    [[nodiscard]] double drain_bytes() const noexcept { return capacity_mbps * 1e6 / 8.0 / fps; }
    [[nodiscard]] double drop_percent() const noexcept {
        const auto total = delivered + dropped;
        return total ? 100.0 * static_cast<double>(dropped) / static_cast<double>(total) : 0.0;
    }
};

inline void check_channel(const ChannelModel& m) {
    if (!(m.capacity_mbps > 0.0) || !(m.fps > 0.0) || !(m.drop_threshold > 0.0) || m.queue_bytes < 0.0) {
        throw Error(Errc::invalid_config, "channel needs positive capacity, fps and threshold and a non-negative queue");
    }
}

enum class FrameOutcome : std::uint8_t { delivered, dropped };

// One frame interval: admit or drop the frame, then drain.
inline FrameOutcome step_channel(ChannelModel& m, std::uint64_t frame_size) {
    const double drain = m.drain_bytes();
    FrameOutcome out = FrameOutcome::delivered;
    if (m.queue_bytes + static_cast<double>(frame_size) > m.drop_threshold * drain) {
        out = FrameOutcome::dropped;
        ++m.dropped;
    } else {
        m.queue_bytes += static_cast<double>(frame_size);
        ++m.delivered;
    }
    m.queue_bytes = std::max(0.0, m.queue_bytes - drain);
    return out;
}

// Bytes for (stream position, resolution, CC Mbps, idr).
using SizeModel = std::function<std::uint64_t(std::size_t, Resolution, double, bool)>;

struct FrameRecord {
    Decision decision;
    double cc_mbps = 0.0;
    std::uint64_t frame_size = 0;
    FrameOutcome outcome = FrameOutcome::delivered;

    friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct SessionReport {
    std::vector<FrameRecord> frames;
    std::vector<std::size_t> scene_frames;  // positions of the idr decisions in `frames`
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;

    [[nodiscard]] double drop_percent() const noexcept {
        const auto total = delivered + dropped;
        return total ? 100.0 * static_cast<double>(dropped) / static_cast<double>(total) : 0.0;
    }

    friend bool operator==(const SessionReport&, const SessionReport&) = default;
};

// The channel capacity follows the CC trace; `channel` supplies fps, the drop
// threshold and the starting queue. Before the first scene change the stream
// runs at the static resolution of the zone of cc[0].
inline SessionReport simulate_session(std::span<const FrameStats> frames, std::span<const double> cc_trace,
                                      const ZoneTable& zones, const Policy& policy, ChannelModel channel,
                                      const SizeModel& sizes) {
    if (frames.size() != cc_trace.size()) {
        throw Error(Errc::stream_length_mismatch, std::to_string(frames.size()) + " frames but " +
                                                      std::to_string(cc_trace.size()) + " CC samples");
    }
    SessionReport report;
    if (frames.empty()) return report;
    const Resolution initial = static_policy(zone_for_bitrate(zones, cc_trace.front()).zone);
    SessionEngine engine(zones, policy, initial);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (i > 0 && frames[i].frame_index <= frames[i - 1].frame_index) {
            throw Error(Errc::non_monotone_frame_index, "frame " + std::to_string(frames[i].frame_index));
        }
        channel.capacity_mbps = cc_trace[i];
        check_channel(channel);
        FrameRecord rec;
        rec.decision = engine.on_frame(frames[i], cc_trace[i]);
        rec.cc_mbps = cc_trace[i];
        rec.frame_size = sizes(i, rec.decision.resolution, cc_trace[i], rec.decision.idr);
        rec.outcome = step_channel(channel, rec.frame_size);
        if (rec.decision.idr) report.scene_frames.push_back(i);
        report.frames.push_back(rec);
    }
    report.delivered = channel.delivered;
    report.dropped = channel.dropped;
    return report;
}

inline void write_decision_log(std::ostream& out, const SessionReport& r) {
    out << "frame_index,cc_mbps,zone,resolution,idr,source,probability,frame_size_bytes,outcome\n";
    for (const auto& f : r.frames) {
        const auto& d = f.decision;
        out << d.frame_index << ',' << detail::format_fixed(f.cc_mbps, 6) << ',';
        if (d.zone_id >= 0) out << d.zone_id;
        out << ',' << d.resolution << ',' << (d.idr ? 1 : 0) << ',' << to_string(d.source) << ',';
        if (d.probability) out << detail::format_fixed(*d.probability, 6);
        out << ',' << f.frame_size << ',' << (f.outcome == FrameOutcome::dropped ? "dropped" : "delivered") << '\n';
    }
}

inline void write_session_summary(std::ostream& out, const SessionReport& r) {
    out << "# frames=" << r.frames.size() << " delivered=" << r.delivered << " dropped=" << r.dropped
        << " drop_percent=" << detail::format_fixed(r.drop_percent(), 4) << '\n';
    out << "scene,frame_index,cc_mbps,zone,resolution,source,probability,clamped\n";
    for (std::size_t s = 0; s < r.scene_frames.size(); ++s) {
        const auto& f = r.frames[r.scene_frames[s]];
        const auto& d = f.decision;
        out << s << ',' << d.frame_index << ',' << detail::format_fixed(f.cc_mbps, 6) << ',' << d.zone_id << ','
            << d.resolution << ',' << to_string(d.source) << ',';
        if (d.probability) out << detail::format_fixed(*d.probability, 6);
        out << ',' << (d.clamped ? 1 : 0) << '\n';
    }
}

}  // namespace caeigs
