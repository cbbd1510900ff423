#pragma once
// Glue between the offline analysis and training: scene segmentation of a
// stats stream, hull-derived labels per zone and per-zone training sets.

#include <array>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "caeigs/cnn.hpp"
#include "caeigs/detail/text.hpp"
#include "caeigs/domain.hpp"
#include "caeigs/error.hpp"
#include "caeigs/eval.hpp"
#include "caeigs/features.hpp"
#include "caeigs/ingest.hpp"
#include "caeigs/ladder.hpp"

namespace caeigs {

struct SceneSpan {
    std::size_t begin = 0;  // index into the frame sequence
    std::size_t end = 0;    // one past the last frame

    [[nodiscard]] std::size_t size() const noexcept { return end - begin; }
};

// A scene starts at every scene-change frame; the first frame always opens one.
inline std::vector<SceneSpan> split_scenes(std::span<const FrameStats> frames) {
    std::vector<SceneSpan> scenes;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (i == 0 || frames[i].scene_change) {
            if (!scenes.empty()) scenes.back().end = i;
            scenes.push_back({i, frames.size()});
        }
    }
    return scenes;
}

inline std::vector<FrameMatrix> frame_matrices(std::span<const FrameStats> frames) {
    std::vector<FrameMatrix> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(frame_matrix(f));
    return out;
}

// The trailing 60 frames of a scene, standardized.
inline FeatureTensor scene_tensor(std::span<const FrameMatrix> matrices, const SceneSpan& scene,
                                  const Normalization& norm) {
    if (scene.size() < kWindowFrames) {
        throw Error(Errc::window_not_full, "scene spans " + std::to_string(scene.size()) + " frames, needs " +
                                               std::to_string(kWindowFrames));
    }
    return standardize(matrices.subspan(scene.end - kWindowFrames, kWindowFrames), norm);
}

// Bitrate at which each zone's label is read off the hull, one per zone.
inline std::vector<double> default_label_targets() { return {1.5, 3.5, 7.5, 12.5}; }

inline std::vector<double> zone_midpoints(const ZoneTable& zones) {
    std::vector<double> out;
    for (const auto& z : zones.zones) out.push_back((z.low_mbps + z.high_mbps) / 2.0);
    return out;
}

struct LabelTable {
    std::vector<double> targets;                   // per zone, index = zone position in the table
    std::map<SceneKey, std::vector<int>> labels;   // per scene, aligned with targets

    friend bool operator==(const LabelTable&, const LabelTable&) = default;
};

inline LabelTable label_scenes(const RQTable& table, const ZoneTable& zones, std::span<const double> targets,
                               Metric metric = Metric::vmaf) {
    if (targets.size() != zones.zones.size()) {
        throw Error(Errc::invalid_config, "need one label target per zone, got " + std::to_string(targets.size()));
    }
    LabelTable out{{targets.begin(), targets.end()}, {}};
    for (const auto& [key, pts] : table) {
        const auto hull = upper_convex_hull(pts, metric);
        auto& row = out.labels[key];
        for (std::size_t z = 0; z < zones.zones.size(); ++z) row.push_back(ground_truth_label(hull, targets[z], zones.zones[z]));
    }
    return out;
}

inline void write_labels(std::ostream& out, const LabelTable& t) {
    out << "clip_id,scene_id,zone,target_mbps,label\n";
    for (const auto& [key, row] : t.labels) {
        for (std::size_t z = 0; z < row.size(); ++z) {
            out << key.first << ',' << key.second << ',' << z << ',' << detail::format_double(t.targets[z]) << ','
                << row[z] << '\n';
        }
    }
}

inline LabelTable parse_labels(std::istream& in) {
    std::map<SceneKey, std::map<std::size_t, int>> rows;
    std::map<std::size_t, double> targets;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        auto bad = [&](const std::string& why) {
            return Error(Errc::malformed_row, "labels line " + std::to_string(line_no) + ": " + why);
        };
        const auto cells = detail::split(text, ',');
        if (cells.size() != 5) throw bad("expected clip_id,scene_id,zone,target_mbps,label");
        const auto zone = detail::parse_uint(cells[2]);
        const auto target = detail::parse_double(cells[3]);
        const auto label = detail::parse_uint(cells[4]);
        if (!zone || !target || !label || *label > 1) throw bad("bad zone, target or label");
        const auto [it, fresh] = targets.emplace(static_cast<std::size_t>(*zone), *target);
        if (!fresh && !same_bitrate(it->second, *target)) throw bad("zone target differs between rows");
        SceneKey key{std::string(detail::trim(cells[0])), std::string(detail::trim(cells[1]))};
        if (!rows[key].emplace(static_cast<std::size_t>(*zone), static_cast<int>(*label)).second) throw bad("duplicate label");
    }
    LabelTable t;
    for (std::size_t z = 0; z < targets.size(); ++z) {
        if (!targets.contains(z)) throw Error(Errc::malformed_row, "labels skip zone " + std::to_string(z));
        t.targets.push_back(targets.at(z));
    }
    for (const auto& [key, by_zone] : rows) {
        if (by_zone.size() != t.targets.size()) {
            throw Error(Errc::grid_mismatch, "scene " + key.first + "/" + key.second + " lacks a label for some zone");
        }
        auto& row = t.labels[key];
        for (const auto& [z, y] : by_zone) row.push_back(y);
    }
    return t;
}

// Scenes of a stats stream in order, paired with the label table's scenes in
// key order. Scenes shorter than the window are skipped.
struct SceneSamples {
    std::vector<SceneKey> keys;
    std::vector<FeatureTensor> tensors;
};

inline SceneSamples scene_samples(std::span<const FrameStats> frames, const std::vector<SceneKey>& keys,
                                  const Normalization& norm) {
    const auto scenes = split_scenes(frames);
    if (scenes.size() != keys.size()) {
        throw Error(Errc::grid_mismatch, "stats stream has " + std::to_string(scenes.size()) + " scenes but " +
                                             std::to_string(keys.size()) + " are labelled");
    }
    const auto matrices = frame_matrices(frames);
    SceneSamples out;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        if (scenes[s].size() < kWindowFrames) continue;
        out.keys.push_back(keys[s]);
        out.tensors.push_back(scene_tensor(matrices, scenes[s], norm));
    }
    return out;
}

template <typename Map>
std::vector<SceneKey> keys_of(const Map& m) {
    std::vector<SceneKey> out;
    out.reserve(m.size());
    for (const auto& kv : m) out.push_back(kv.first);
    return out;
}

inline Dataset zone_dataset(const SceneSamples& samples, const LabelTable& labels, std::size_t zone) {
    Dataset d;
    for (std::size_t i = 0; i < samples.keys.size(); ++i) {
        const auto it = labels.labels.find(samples.keys[i]);
        if (it == labels.labels.end()) continue;
        d.inputs.push_back(samples.tensors[i]);
        d.labels.push_back(it->second.at(zone));
    }
    return d;
}

// CAE choices per (scene, target): the bundle of the target's zone decides
// between that zone's candidates.
inline DecisionSet cae_decisions(const SceneSamples& samples, std::span<const double> targets, const ZoneTable& zones,
                                 const std::map<int, WeightBundle>& bundles) {
    DecisionSet set;
    set.targets.assign(targets.begin(), targets.end());
    for (std::size_t i = 0; i < samples.keys.size(); ++i) {
        std::map<int, double> prob_by_zone;
        auto& row = set.choices[samples.keys[i]];
        auto& probs = set.probabilities[samples.keys[i]];
        for (const double t : targets) {
            const Zone zone = zone_for_bitrate(zones, t).zone;
            auto cached = prob_by_zone.find(zone.id);
            if (cached == prob_by_zone.end()) {
                const auto b = bundles.find(zone.id);
                if (b == bundles.end()) throw Error(Errc::missing_bundle, "no weights for zone " + std::to_string(zone.id));
                cached = prob_by_zone.emplace(zone.id, forward(b->second, samples.tensors[i])).first;
            }
            const int label = decide(cached->second, bundles.at(zone.id).threshold);
            row.push_back(zone.candidate(label));
            probs.push_back(cached->second);
        }
    }
    return set;
}

}  // namespace caeigs
