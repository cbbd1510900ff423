#pragma once
// Shared vocabulary: spatial resolutions, bitrate zones and the zone ladder.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "caeigs/detail/text.hpp"
#include "caeigs/error.hpp"

namespace caeigs {

// 16:9 resolutions in ascending order; enum order is the ladder order.
enum class Resolution : std::uint8_t { p360, p540, p720, p1080, p2160 };

inline constexpr std::array<Resolution, 5> kAllResolutions = {
    Resolution::p360, Resolution::p540, Resolution::p720, Resolution::p1080, Resolution::p2160};

// The set the encoder actually streams at.
inline constexpr std::array<Resolution, 4> kLadderResolutions = {
    Resolution::p360, Resolution::p540, Resolution::p720, Resolution::p1080};

constexpr int height(Resolution r) noexcept {
    switch (r) {
        case Resolution::p360: return 360;
        case Resolution::p540: return 540;
        case Resolution::p720: return 720;
        case Resolution::p1080: return 1080;
        case Resolution::p2160: return 2160;
    }
    return 0;
}

constexpr int width(Resolution r) noexcept { return 16 * height(r) / 9; }

constexpr int ladder_index(Resolution r) noexcept { return static_cast<int>(r); }

constexpr std::string_view to_string(Resolution r) noexcept {
    switch (r) {
        case Resolution::p360: return "360p";
        case Resolution::p540: return "540p";
        case Resolution::p720: return "720p";
        case Resolution::p1080: return "1080p";
        case Resolution::p2160: return "2160p";
    }
    return "?";
}

inline std::optional<Resolution> parse_resolution(std::string_view s) {
    s = detail::trim(s);
    for (const auto r : kAllResolutions) {
        if (s == to_string(r)) return r;
    }
    return std::nullopt;
}

inline std::ostream& operator<<(std::ostream& os, Resolution r) { return os << to_string(r); }

// Number of coding-tree-block rows covering the frame height.
constexpr std::size_t ctb_rows(Resolution r, int ctb_size = 64) {
    if (ctb_size <= 0) throw Error(Errc::invalid_config, "ctb_size must be positive");
    return static_cast<std::size_t>((height(r) + ctb_size - 1) / ctb_size);
}

struct Zone {
    int id = 0;
    double low_mbps = 0.0;   // inclusive
    double high_mbps = 0.0;  // exclusive, except for the last zone of a table
    Resolution static_resolution = Resolution::p360;
    Resolution candidate_low = Resolution::p360;
    Resolution candidate_high = Resolution::p540;

    [[nodiscard]] Resolution candidate(int label) const noexcept {
        return label != 0 ? candidate_high : candidate_low;
    }
    [[nodiscard]] bool in_pair(Resolution r) const noexcept {
        return r == candidate_low || r == candidate_high;
    }

    friend bool operator==(const Zone&, const Zone&) = default;
};

struct ZoneTable {
    std::vector<Zone> zones;

    [[nodiscard]] double min_mbps() const { return zones.empty() ? 0.0 : zones.front().low_mbps; }
    [[nodiscard]] double max_mbps() const { return zones.empty() ? 0.0 : zones.back().high_mbps; }

    [[nodiscard]] const Zone* find(int id) const {
        for (const auto& z : zones) {
            if (z.id == id) return &z;
        }
        return nullptr;
    }

    friend bool operator==(const ZoneTable&, const ZoneTable&) = default;
};

inline ZoneTable default_zone_table() {
    using R = Resolution;
    return ZoneTable{{
        {0, 1.0, 2.0, R::p360, R::p360, R::p540},
        {1, 2.0, 5.0, R::p540, R::p540, R::p720},
        {2, 5.0, 10.0, R::p720, R::p720, R::p1080},
        {3, 10.0, 20.0, R::p1080, R::p720, R::p1080},
    }};
}

struct ZoneMatch {
    Zone zone;
    bool clamped = false;
};

// Ranges are [low, high) with the final zone closed at its high end.
// Bitrates outside the table clamp to the nearest zone.
inline ZoneMatch zone_for_bitrate(const ZoneTable& table, double mbps) {
    if (!(mbps > 0.0)) throw Error(Errc::non_positive_bitrate, "bitrate must be > 0, got " + detail::format_double(mbps));
    if (table.zones.empty()) throw Error(Errc::invalid_config, "zone table is empty");
    if (mbps < table.min_mbps()) return {table.zones.front(), true};
    if (mbps > table.max_mbps()) return {table.zones.back(), true};
    for (std::size_t i = 0; i + 1 < table.zones.size(); ++i) {
        const auto& z = table.zones[i];
        if (mbps >= z.low_mbps && mbps < z.high_mbps) return {z, false};
    }
    return {table.zones.back(), false};
}

// Lists every broken invariant; an empty result means the table is usable.
inline std::vector<std::string> validate_zone_table(const ZoneTable& table) {
    std::vector<std::string> report;
    if (table.zones.empty()) {
        report.emplace_back("empty: table has no zones");
        return report;
    }
    for (std::size_t i = 0; i < table.zones.size(); ++i) {
        const auto& z = table.zones[i];
        const std::string tag = "zone " + std::to_string(z.id) + ": ";
        if (!(z.low_mbps < z.high_mbps)) report.push_back(tag + "empty range (low >= high)");
        if (!(z.low_mbps > 0.0)) report.push_back(tag + "non-positive low bound");
        if (!(z.candidate_low < z.candidate_high)) {
            report.push_back(tag + "candidate order (low must be below high)");
        } else if (ladder_index(z.candidate_high) - ladder_index(z.candidate_low) != 1) {
            report.push_back(tag + "candidates not adjacent (" + std::string(to_string(z.candidate_low)) + "/" +
                             std::string(to_string(z.candidate_high)) + ")");
        }
        if (!z.in_pair(z.static_resolution)) report.push_back(tag + "static resolution outside candidate pair");
        if (i > 0) {
            const auto& prev = table.zones[i - 1];
            if (z.low_mbps < prev.high_mbps) {
                report.push_back(tag + "overlapping or unsorted range");
            } else if (z.low_mbps != prev.high_mbps) {
                report.push_back(tag + "non-contiguous range (gap after zone " + std::to_string(prev.id) + ")");
            }
            if (z.static_resolution < prev.static_resolution) {
                report.push_back(tag + "static resolution decreases");
            }
            if (z.id <= prev.id) report.push_back(tag + "ids not ascending");
        }
    }
    return report;
}

// Key-value zone table file:
//
//   # comment
//   zone.0.range = 1 2
//   zone.0.static = 360p
//   zone.0.candidates = 360p 540p
//
// Zones are ordered by id. Parsing does not validate; call validate_zone_table.
inline ZoneTable parse_zone_table(std::istream& in) {
    struct Partial {
        std::optional<std::pair<double, double>> range;
        std::optional<Resolution> static_res;
        std::optional<std::pair<Resolution, Resolution>> candidates;
    };
    std::map<int, Partial> partial;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& why) {
        throw Error(Errc::invalid_config, "zone table line " + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++line_no;
        auto text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) fail("expected key = value");
        const auto key = detail::trim(text.substr(0, eq));
        const auto value = detail::trim(text.substr(eq + 1));
        const auto parts = detail::split(key, '.');
        if (parts.size() != 3 || parts[0] != "zone") fail("unknown key '" + std::string(key) + "'");
        const auto id = detail::parse_uint(parts[1]);
        if (!id) fail("bad zone id");
        auto& p = partial[static_cast<int>(*id)];
        const auto fields = detail::split_ws(value);
        if (parts[2] == "range") {
            if (fields.size() != 2) fail("range needs two numbers");
            const auto lo = detail::parse_double(fields[0]);
            const auto hi = detail::parse_double(fields[1]);
            if (!lo || !hi) fail("range values must be numbers");
            p.range = {*lo, *hi};
        } else if (parts[2] == "static") {
            if (fields.size() != 1) fail("static needs one resolution");
            p.static_res = parse_resolution(fields[0]);
            if (!p.static_res) fail("unknown resolution '" + std::string(fields[0]) + "'");
        } else if (parts[2] == "candidates") {
            if (fields.size() != 2) fail("candidates needs two resolutions");
            const auto a = parse_resolution(fields[0]);
            const auto b = parse_resolution(fields[1]);
            if (!a || !b) fail("unknown resolution in candidates");
            p.candidates = {*a, *b};
        } else {
            fail("unknown field '" + std::string(parts[2]) + "'");
        }
    }
    ZoneTable table;
    for (const auto& [id, p] : partial) {
        if (!p.range || !p.static_res || !p.candidates) {
            throw Error(Errc::invalid_config, "zone " + std::to_string(id) + " is missing range, static or candidates");
        }
        table.zones.push_back(
            {id, p.range->first, p.range->second, *p.static_res, p.candidates->first, p.candidates->second});
    }
    return table;
}

inline ZoneTable parse_zone_table(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_zone_table(in);
}

inline void write_zone_table(std::ostream& out, const ZoneTable& table) {
    for (const auto& z : table.zones) {
        const auto id = std::to_string(z.id);
        out << "zone." << id << ".range = " << detail::format_double(z.low_mbps) << ' '
            << detail::format_double(z.high_mbps) << '\n';
        out << "zone." << id << ".static = " << z.static_resolution << '\n';
        out << "zone." << id << ".candidates = " << z.candidate_low << ' ' << z.candidate_high << '\n';
    }
}

}  // namespace caeigs
