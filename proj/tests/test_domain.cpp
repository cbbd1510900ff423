#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "caeigs/domain.hpp"

using namespace caeigs;

namespace {

bool mentions(const std::vector<std::string>& report, std::string_view needle) {
    for (const auto& line : report) {
        if (line.find(needle) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

TEST(Resolution, HeightWidthAndOrder) {
    EXPECT_EQ(height(Resolution::p360), 360);
    EXPECT_EQ(width(Resolution::p360), 640);
    EXPECT_EQ(width(Resolution::p540), 960);
    EXPECT_EQ(width(Resolution::p720), 1280);
    EXPECT_EQ(width(Resolution::p1080), 1920);
    EXPECT_EQ(width(Resolution::p2160), 3840);
    for (std::size_t i = 1; i < kAllResolutions.size(); ++i) {
        EXPECT_LT(kAllResolutions[i - 1], kAllResolutions[i]);
        EXPECT_LT(height(kAllResolutions[i - 1]), height(kAllResolutions[i]));
    }
}

TEST(Resolution, NamesRoundTrip) {
    for (const auto r : kAllResolutions) EXPECT_EQ(parse_resolution(to_string(r)), r);
    EXPECT_EQ(parse_resolution(" 720p "), Resolution::p720);
    EXPECT_FALSE(parse_resolution("480p"));
    std::ostringstream os;
    os << Resolution::p1080;
    EXPECT_EQ(os.str(), "1080p");
}

TEST(CtbRows, KnownValues) {
    EXPECT_EQ(ctb_rows(Resolution::p2160), 34u);
    EXPECT_EQ(ctb_rows(Resolution::p1080), 17u);
    EXPECT_EQ(ctb_rows(Resolution::p720), 12u);
    EXPECT_EQ(ctb_rows(Resolution::p540), 9u);
    EXPECT_EQ(ctb_rows(Resolution::p360), 6u);
    EXPECT_EQ(ctb_rows(Resolution::p1080, 32), 34u);
    EXPECT_THROW((void)ctb_rows(Resolution::p1080, 0), Error);
}

TEST(CtbRows, CeilingBoundsAndMonotone) {
    std::size_t prev = 0;
    for (const auto r : kAllResolutions) {
        const auto n = ctb_rows(r);
        const auto h = static_cast<std::size_t>(height(r));
        EXPECT_GE(n * 64, h);
        EXPECT_GT(h, (n - 1) * 64);
        EXPECT_GE(n, prev);
        prev = n;
    }
}

TEST(ZoneTable, DefaultMatchesLadder) {
    const auto t = default_zone_table();
    ASSERT_EQ(t.zones.size(), 4u);
    EXPECT_TRUE(validate_zone_table(t).empty());
    const Zone& z1 = t.zones[1];
    EXPECT_EQ(z1.low_mbps, 2.0);
    EXPECT_EQ(z1.high_mbps, 5.0);
    EXPECT_EQ(z1.static_resolution, Resolution::p540);
    EXPECT_EQ(z1.candidate_low, Resolution::p540);
    EXPECT_EQ(z1.candidate_high, Resolution::p720);
    EXPECT_EQ(t.zones[3].candidate_low, Resolution::p720);
    EXPECT_EQ(t.zones[3].static_resolution, Resolution::p1080);
    EXPECT_EQ(t.min_mbps(), 1.0);
    EXPECT_EQ(t.max_mbps(), 20.0);
    for (const auto& z : t.zones) {
        EXPECT_EQ(ladder_index(z.candidate_high) - ladder_index(z.candidate_low), 1);
    }
}

TEST(ZoneForBitrate, Examples) {
    const auto t = default_zone_table();
    const auto m = zone_for_bitrate(t, 3.5);
    EXPECT_EQ(m.zone.id, 1);
    EXPECT_FALSE(m.clamped);
    EXPECT_EQ(m.zone.candidate_low, Resolution::p540);
    EXPECT_EQ(m.zone.candidate_high, Resolution::p720);
    EXPECT_EQ(zone_for_bitrate(t, 2.0).zone.id, 1);
    EXPECT_EQ(zone_for_bitrate(t, 5.0).zone.id, 2);
    EXPECT_EQ(zone_for_bitrate(t, 10.0).zone.id, 3);
    EXPECT_EQ(zone_for_bitrate(t, 1.0).zone.id, 0);
    const auto top = zone_for_bitrate(t, 20.0);
    EXPECT_EQ(top.zone.id, 3);
    EXPECT_FALSE(top.clamped);
    const auto high = zone_for_bitrate(t, 25.0);
    EXPECT_EQ(high.zone.id, 3);
    EXPECT_TRUE(high.clamped);
    const auto low = zone_for_bitrate(t, 0.5);
    EXPECT_EQ(low.zone.id, 0);
    EXPECT_TRUE(low.clamped);
}

TEST(ZoneForBitrate, NonPositiveRejected) {
    const auto t = default_zone_table();
    for (const double bad : {0.0, -1.0, std::nan("")}) {
        try {
            (void)zone_for_bitrate(t, bad);
            FAIL() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::non_positive_bitrate);
        }
    }
}

TEST(ZoneForBitrate, SweepFindsExactlyOneZone) {
    const auto t = default_zone_table();
    for (int k = 100; k <= 2000; ++k) {
        const double mbps = k / 100.0;
        int owners = 0;
        for (std::size_t i = 0; i < t.zones.size(); ++i) {
            const auto& z = t.zones[i];
            const bool last = i + 1 == t.zones.size();
            owners += mbps >= z.low_mbps && (mbps < z.high_mbps || (last && mbps <= z.high_mbps));
        }
        ASSERT_EQ(owners, 1) << mbps;
        const auto m = zone_for_bitrate(t, mbps);
        EXPECT_FALSE(m.clamped);
        EXPECT_GE(mbps, m.zone.low_mbps);
        EXPECT_LE(mbps, m.zone.high_mbps);
    }
}

TEST(ValidateZoneTable, ReportsGap) {
    auto t = default_zone_table();
    t.zones[1].high_mbps = 4.0;
    t.zones[1].low_mbps = 2.0;
    EXPECT_TRUE(mentions(validate_zone_table(t), "non-contiguous"));
}

TEST(ValidateZoneTable, ReportsNonAdjacentPair) {
    auto t = default_zone_table();
    t.zones[0].candidate_high = Resolution::p720;
    EXPECT_TRUE(mentions(validate_zone_table(t), "not adjacent"));
}

TEST(ValidateZoneTable, ReportsEveryViolation) {
    auto t = default_zone_table();
    t.zones[2].static_resolution = Resolution::p360;  // outside its pair and below zone 1
    t.zones[3].low_mbps = 9.0;
    const auto report = validate_zone_table(t);
    EXPECT_TRUE(mentions(report, "static resolution outside candidate pair"));
    EXPECT_TRUE(mentions(report, "overlapping"));
    EXPECT_GE(report.size(), 3u);
    EXPECT_TRUE(mentions(validate_zone_table(ZoneTable{}), "empty"));
}

TEST(ZoneTableFile, RoundTrip) {
    const auto t = default_zone_table();
    std::ostringstream out;
    write_zone_table(out, t);
    EXPECT_EQ(parse_zone_table(out.str()), t);
}

TEST(ZoneTableFile, CommentsAndErrors) {
    const auto t = parse_zone_table(
        "# two zones\n"
        "zone.0.range = 1 3\n"
        "zone.0.static = 360p\n"
        "zone.0.candidates = 360p 540p\n"
        "\n"
        "zone.1.range = 3 8\n"
        "zone.1.static = 720p\n"
        "zone.1.candidates = 540p 720p\n");
    ASSERT_EQ(t.zones.size(), 2u);
    EXPECT_TRUE(validate_zone_table(t).empty());
    EXPECT_EQ(zone_for_bitrate(t, 9.0).zone.id, 1);
    EXPECT_THROW(parse_zone_table("zone.0.range = 1\n"), Error);
    EXPECT_THROW(parse_zone_table("zone.0.static = 480p\n"), Error);
    EXPECT_THROW(parse_zone_table("zone.0.range = 1 2\n"), Error);  // incomplete zone
    EXPECT_THROW(parse_zone_table("nonsense\n"), Error);
}
