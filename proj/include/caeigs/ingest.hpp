#pragma once
// Encoder statistics logs and rate-quality measurement tables.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "caeigs/detail/text.hpp"
#include "caeigs/domain.hpp"
#include "caeigs/error.hpp"

namespace caeigs {

inline constexpr std::size_t kNumFeatures = 7;

enum Feature : std::size_t {
    kIntraBlocks = 0,
    kInterBlocks,
    kSkipBlocks,
    kAverageSatd,
    kMinQp,
    kMaxQp,
    kMotionType,
};

// Field keys used in the stats log; these are the encoder's own names.
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "numIntraBlockPerLine", "numInterBlockPerLine", "numSkipBlockPerLine", "averageSatdPerLine",
    "minQpPerLine",         "maxQpPerLine",         "motionTypePerLine",
};

struct FrameStats {
    std::uint64_t frame_index = 0;
    bool scene_change = false;
    Resolution encoded_resolution = Resolution::p1080;
    std::uint64_t frame_size = 1;  // bytes
    std::array<std::vector<double>, kNumFeatures> per_line;

    friend bool operator==(const FrameStats&, const FrameStats&) = default;
};

// Returns an empty string when the frame is valid, otherwise the first problem.
inline std::string check_frame(const FrameStats& f) {
    const auto rows = ctb_rows(f.encoded_resolution);
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        if (f.per_line[k].size() != rows) {
            return std::string(kFeatureNames[k]) + " has " + std::to_string(f.per_line[k].size()) +
                   " values, expected " + std::to_string(rows);
        }
        for (const double v : f.per_line[k]) {
            if (!std::isfinite(v)) return std::string(kFeatureNames[k]) + " has a non-finite value";
        }
    }
    if (f.frame_size == 0) return "frame_size_bytes must be > 0";
    for (const auto k : {kIntraBlocks, kInterBlocks, kSkipBlocks, kAverageSatd}) {
        for (const double v : f.per_line[k]) {
            if (v < 0.0) return std::string(kFeatureNames[k]) + " is negative";
        }
    }
    for (std::size_t i = 0; i < rows; ++i) {
        const double lo = f.per_line[kMinQp][i];
        const double hi = f.per_line[kMaxQp][i];
        if (lo < 0.0 || hi > 51.0) return "QP outside [0, 51] on line " + std::to_string(i);
        if (lo > hi) return "minQp > maxQp on line " + std::to_string(i);
    }
    return {};
}

inline nlohmann::json to_json(const FrameStats& f) {
    nlohmann::json j;
    j["frame_index"] = f.frame_index;
    j["scene_change"] = f.scene_change;
    j["resolution"] = std::string(to_string(f.encoded_resolution));
    j["frame_size_bytes"] = f.frame_size;
    for (std::size_t k = 0; k < kNumFeatures; ++k) j[std::string(kFeatureNames[k])] = f.per_line[k];
    return j;
}

// One JSON object per line, arrays ordered top CTB row to bottom.
inline void write_stats_log(std::ostream& out, const std::vector<FrameStats>& frames) {
    for (const auto& f : frames) out << to_json(f).dump() << '\n';
}

inline std::vector<FrameStats> parse_stats_log(std::istream& in) {
    std::vector<FrameStats> frames;
    std::string line;
    std::size_t line_no = 0;
    auto malformed = [&](const std::string& why) {
        return Error(Errc::malformed_record, "stats log line " + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw malformed(std::string("not valid JSON (") + e.what() + ")");
        }
        if (!j.is_object()) throw malformed("record is not an object");
        FrameStats f;
        try {
            const auto& idx = j.at("frame_index");
            if (!idx.is_number_unsigned()) throw malformed("frame_index must be a non-negative integer");
            f.frame_index = idx.get<std::uint64_t>();
            const auto& sc = j.at("scene_change");
            if (!sc.is_boolean()) throw malformed("scene_change must be a boolean");
            f.scene_change = sc.get<bool>();
            const auto res = parse_resolution(j.at("resolution").get<std::string>());
            if (!res) throw malformed("unknown resolution");
            f.encoded_resolution = *res;
            const auto& size = j.at("frame_size_bytes");
            if (!size.is_number_unsigned()) throw malformed("frame_size_bytes must be a non-negative integer");
            f.frame_size = size.get<std::uint64_t>();
            for (std::size_t k = 0; k < kNumFeatures; ++k) {
                const auto& arr = j.at(std::string(kFeatureNames[k]));
                if (!arr.is_array()) throw malformed(std::string(kFeatureNames[k]) + " must be an array");
                f.per_line[k].reserve(arr.size());
                for (const auto& v : arr) {
                    if (!v.is_number()) throw malformed(std::string(kFeatureNames[k]) + " holds a non-number");
                    f.per_line[k].push_back(v.get<double>());
                }
            }
        } catch (const nlohmann::json::out_of_range& e) {
            throw malformed(std::string("missing key (") + e.what() + ")");
        } catch (const nlohmann::json::type_error& e) {
            throw malformed(std::string("wrong type (") + e.what() + ")");
        }
        if (auto why = check_frame(f); !why.empty()) {
            throw Error(Errc::invariant_violation, "stats log line " + std::to_string(line_no) + ": " + why);
        }
        if (!frames.empty() && f.frame_index <= frames.back().frame_index) {
            throw Error(Errc::non_monotone_frame_index,
                        "stats log line " + std::to_string(line_no) + ": frame_index " +
                            std::to_string(f.frame_index) + " does not follow " +
                            std::to_string(frames.back().frame_index));
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

inline std::vector<FrameStats> parse_stats_log(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_stats_log(in);
}

enum class Metric : std::uint8_t { vmaf, psnr_y, ssim_yb };

inline constexpr std::array<Metric, 3> kAllMetrics = {Metric::vmaf, Metric::psnr_y, Metric::ssim_yb};

constexpr std::string_view to_string(Metric m) noexcept {
    switch (m) {
        case Metric::vmaf: return "vmaf";
        case Metric::psnr_y: return "psnr_y";
        case Metric::ssim_yb: return "ssim_yb";
    }
    return "?";
}

inline std::optional<Metric> parse_metric(std::string_view s) {
    for (const auto m : kAllMetrics) {
        if (detail::trim(s) == to_string(m)) return m;
    }
    return std::nullopt;
}

struct Quality {
    double vmaf = 0.0;
    double psnr_y = 0.0;
    double ssim_yb = 0.0;

    [[nodiscard]] double get(Metric m) const noexcept {
        switch (m) {
            case Metric::vmaf: return vmaf;
            case Metric::psnr_y: return psnr_y;
            case Metric::ssim_yb: return ssim_yb;
        }
        return vmaf;
    }
    friend bool operator==(const Quality&, const Quality&) = default;
};

struct RQPoint {
    std::string clip_id;
    std::string scene_id;
    Resolution resolution = Resolution::p1080;
    double target_bitrate = 0.0;    // Mbps
    double measured_bitrate = 0.0;  // Mbps
    Quality quality;

    [[nodiscard]] double q(Metric m) const noexcept { return quality.get(m); }
    friend bool operator==(const RQPoint&, const RQPoint&) = default;
};

using SceneKey = std::pair<std::string, std::string>;  // (clip_id, scene_id)

// Grouped by scene; within a group sorted by (resolution, target_bitrate).
using RQTable = std::map<SceneKey, std::vector<RQPoint>>;

inline constexpr std::array<std::string_view, 8> kRQColumns = {
    "clip_id",   "scene_id", "resolution", "target_bitrate_mbps", "measured_bitrate_mbps",
    "vmaf",      "psnr_y",   "ssim_yb"};

inline std::string check_rq_point(const RQPoint& p) {
    if (!(p.target_bitrate > 0.0) || !std::isfinite(p.target_bitrate)) return "target bitrate must be > 0";
    if (!(p.measured_bitrate > 0.0) || !std::isfinite(p.measured_bitrate)) return "measured bitrate must be > 0";
    if (!(p.quality.vmaf >= 0.0 && p.quality.vmaf <= 100.0)) return "vmaf outside [0, 100]";
    if (!(p.quality.ssim_yb >= 0.0 && p.quality.ssim_yb <= 1.0)) return "ssim_yb outside [0, 1]";
    if (!std::isfinite(p.quality.psnr_y)) return "psnr_y is not finite";
    if (p.clip_id.empty() || p.scene_id.empty()) return "empty clip_id or scene_id";
    return {};
}

inline void sort_scene_points(std::vector<RQPoint>& pts) {
    std::sort(pts.begin(), pts.end(), [](const RQPoint& a, const RQPoint& b) {
        return std::tie(a.resolution, a.target_bitrate) < std::tie(b.resolution, b.target_bitrate);
    });
}

inline RQTable group_rq_points(std::vector<RQPoint> points) {
    RQTable table;
    for (auto& p : points) {
        SceneKey key{p.clip_id, p.scene_id};
        table[key].push_back(std::move(p));
    }
    for (auto& [key, pts] : table) {
        sort_scene_points(pts);
        for (std::size_t i = 1; i < pts.size(); ++i) {
            if (pts[i].resolution == pts[i - 1].resolution && pts[i].target_bitrate == pts[i - 1].target_bitrate) {
                throw Error(Errc::duplicate_point, "scene " + key.first + "/" + key.second + " has two rows at " +
                                                       std::string(to_string(pts[i].resolution)) + " " +
                                                       detail::format_double(pts[i].target_bitrate) + " Mbps");
            }
        }
    }
    return table;
}

// Comma-separated with a header row naming the columns (any order).
inline RQTable parse_rq_table(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::array<std::size_t, kRQColumns.size()> col{};
    bool have_header = false;
    std::size_t n_cols = 0;
    std::vector<RQPoint> points;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto cells = detail::split(text, ',');
        if (!have_header) {
            n_cols = cells.size();
            for (std::size_t c = 0; c < kRQColumns.size(); ++c) {
                std::size_t found = cells.size();
                for (std::size_t i = 0; i < cells.size(); ++i) {
                    if (detail::trim(cells[i]) == kRQColumns[c]) found = i;
                }
                if (found == cells.size()) {
                    const auto code = c >= 5 ? Errc::missing_quality_column : Errc::malformed_row;
                    throw Error(code, "rq table header lacks column '" + std::string(kRQColumns[c]) + "'");
                }
                col[c] = found;
            }
            have_header = true;
            continue;
        }
        auto bad = [&](const std::string& why) {
            return Error(Errc::malformed_row, "rq table line " + std::to_string(line_no) + ": " + why);
        };
        if (cells.size() != n_cols) throw bad("expected " + std::to_string(n_cols) + " columns");
        RQPoint p;
        p.clip_id = std::string(detail::trim(cells[col[0]]));
        p.scene_id = std::string(detail::trim(cells[col[1]]));
        const auto res = parse_resolution(cells[col[2]]);
        if (!res) throw bad("unknown resolution '" + std::string(cells[col[2]]) + "'");
        p.resolution = *res;
        std::array<double, 5> nums{};
        for (std::size_t c = 3; c < kRQColumns.size(); ++c) {
            const auto v = detail::parse_double(cells[col[c]]);
            if (!v) throw bad("column " + std::string(kRQColumns[c]) + " is not a number");
            nums[c - 3] = *v;
        }
        p.target_bitrate = nums[0];
        p.measured_bitrate = nums[1];
        p.quality = {nums[2], nums[3], nums[4]};
        if (auto why = check_rq_point(p); !why.empty()) throw bad(why);
        points.push_back(std::move(p));
    }
    return group_rq_points(std::move(points));
}

inline RQTable parse_rq_table(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_rq_table(in);
}

inline void write_rq_header(std::ostream& out) {
    for (std::size_t c = 0; c < kRQColumns.size(); ++c) out << (c ? "," : "") << kRQColumns[c];
    out << '\n';
}

inline void write_rq_point(std::ostream& out, const RQPoint& p) {
    using detail::format_double;
    out << p.clip_id << ',' << p.scene_id << ',' << p.resolution << ',' << format_double(p.target_bitrate) << ','
        << format_double(p.measured_bitrate) << ',' << format_double(p.quality.vmaf) << ','
        << format_double(p.quality.psnr_y) << ',' << format_double(p.quality.ssim_yb) << '\n';
}

inline void write_rq_table(std::ostream& out, const RQTable& table) {
    write_rq_header(out);
    for (const auto& [key, pts] : table) {
        for (const auto& p : pts) write_rq_point(out, p);
    }
}

}  // namespace caeigs
