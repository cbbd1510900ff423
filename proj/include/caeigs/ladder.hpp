#pragma once
// Rate-quality hulls, the per-bitrate Optimal Ladder, ground-truth labels and
// the convexity filter applied before BD computations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caeigs/domain.hpp"
#include "caeigs/error.hpp"
#include "caeigs/ingest.hpp"

namespace caeigs {

struct RDPoint {
    double rate = 0.0;
    double quality = 0.0;

    friend bool operator==(const RDPoint&, const RDPoint&) = default;
};

// True when b lies on or below the chord from a to c (rates a < b < c), i.e.
// slope(a, b) <= slope(b, c). Cross-multiplied so integer inputs stay exact.
inline bool below_or_on_chord(const RDPoint& a, const RDPoint& b, const RDPoint& c) noexcept {
    return (b.quality - a.quality) * (c.rate - b.rate) <= (c.quality - b.quality) * (b.rate - a.rate);
}

// Upper concave envelope: strictly increasing rate and quality with strictly
// decreasing slopes. Input order does not matter.
inline std::vector<std::size_t> upper_hull_indices(std::span<const RDPoint> pts) {
    std::vector<std::size_t> order(pts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pts[a].rate != pts[b].rate) return pts[a].rate < pts[b].rate;
        if (pts[a].quality != pts[b].quality) return pts[a].quality > pts[b].quality;
        return a < b;
    });
    // Pareto filter: keep a point only if it beats every point at lower-or-equal rate.
    std::vector<std::size_t> frontier;
    for (const auto i : order) {
        if (frontier.empty() || pts[i].quality > pts[frontier.back()].quality) {
            if (!frontier.empty() && pts[i].rate == pts[frontier.back()].rate) continue;
            frontier.push_back(i);
        }
    }
    std::vector<std::size_t> hull;
    for (const auto i : frontier) {
        while (hull.size() >= 2 && below_or_on_chord(pts[hull[hull.size() - 2]], pts[hull.back()], pts[i])) {
            hull.pop_back();
        }
        hull.push_back(i);
    }
    return hull;
}

struct ConvexHull {
    std::vector<RQPoint> points;  // rate ascending
    Metric metric = Metric::vmaf;
};

// Built on measured bitrate.
inline ConvexHull upper_convex_hull(std::span<const RQPoint> points, Metric metric = Metric::vmaf) {
    if (points.empty()) throw Error(Errc::empty_input, "hull needs at least one point");
    std::vector<RDPoint> rd;
    rd.reserve(points.size());
    for (const auto& p : points) rd.push_back({p.measured_bitrate, p.q(metric)});
    ConvexHull hull{{}, metric};
    for (const auto i : upper_hull_indices(rd)) hull.points.push_back(points[i]);
    return hull;
}

struct LadderEntry {
    double target_bitrate = 0.0;
    Resolution resolution = Resolution::p1080;
    double quality = 0.0;
    double measured_bitrate = 0.0;
};

struct OptimalLadder {
    std::vector<LadderEntry> entries;  // one per requested target
};

inline bool same_bitrate(double a, double b) noexcept { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

inline const RQPoint* find_point(std::span<const RQPoint> points, Resolution res, double target) {
    for (const auto& p : points) {
        if (p.resolution == res && same_bitrate(p.target_bitrate, target)) return &p;
    }
    return nullptr;
}

inline const RQPoint& require_point(std::span<const RQPoint> points, Resolution res, double target) {
    const RQPoint* p = find_point(points, res, target);
    if (!p) {
        std::string where = points.empty() ? std::string("?") : points.front().clip_id + "/" + points.front().scene_id;
        throw Error(Errc::missing_measurement, "scene " + where + " has no " + std::string(to_string(res)) + " point at " +
                                                   detail::format_double(target) + " Mbps");
    }
    return *p;
}

// Best of the zone's two candidates at each target; equal quality picks the higher resolution.
inline OptimalLadder optimal_ladder(std::span<const RQPoint> scene_points, std::span<const double> targets,
                                    const ZoneTable& zones, Metric metric = Metric::vmaf) {
    OptimalLadder ladder;
    for (const double target : targets) {
        const Zone zone = zone_for_bitrate(zones, target).zone;
        const RQPoint& lo = require_point(scene_points, zone.candidate_low, target);
        const RQPoint& hi = require_point(scene_points, zone.candidate_high, target);
        const RQPoint& best = hi.q(metric) >= lo.q(metric) ? hi : lo;
        ladder.entries.push_back({target, best.resolution, best.q(metric), best.measured_bitrate});
    }
    return ladder;
}

// Nearest hull point to the target (by measured bitrate, ties to the higher
// quality), mapped into the zone pair: 0 = candidate_low, 1 = candidate_high.
// Resolutions outside the pair clamp to the nearer candidate.
inline int ground_truth_label(const ConvexHull& hull, double target, const Zone& zone) {
    if (hull.points.empty()) throw Error(Errc::empty_hull, "cannot label from an empty hull");
    const RQPoint* best = nullptr;
    double best_dist = 0.0;
    for (const auto& p : hull.points) {
        const double d = std::abs(p.measured_bitrate - target);
        if (!best || d < best_dist || (d == best_dist && p.q(hull.metric) > best->q(hull.metric))) {
            best = &p;
            best_dist = d;
        }
    }
    if (best->resolution <= zone.candidate_low) return 0;
    return 1;
}

// Drops points until the curve is strictly increasing and strictly concave.
// A monotonicity violation removes the lower-quality point of the pair; a
// concavity violation removes the middle point of the offending triple.
inline std::vector<RDPoint> enforce_convexity(std::vector<RDPoint> curve) {
    std::stable_sort(curve.begin(), curve.end(), [](const RDPoint& a, const RDPoint& b) { return a.rate < b.rate; });
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
            const auto& a = curve[i];
            const auto& b = curve[i + 1];
            if (b.rate <= a.rate || b.quality <= a.quality) {
                const std::size_t drop = b.quality <= a.quality ? i + 1 : i;
                curve.erase(curve.begin() + static_cast<std::ptrdiff_t>(drop));
                changed = true;
                break;
            }
        }
        if (changed) continue;
        for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
            if (below_or_on_chord(curve[i - 1], curve[i], curve[i + 1])) {
                curve.erase(curve.begin() + static_cast<std::ptrdiff_t>(i));
                changed = true;
                break;
            }
        }
    }
    if (curve.size() < 2) {
        throw Error(Errc::too_few_points, std::to_string(curve.size()) + " point(s) survive the convexity filter");
    }
    return curve;
}

}  // namespace caeigs
