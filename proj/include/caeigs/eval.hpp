#pragma once
// Bjontegaard-Delta metrics, paired significance tests and ladder comparison reports.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "caeigs/detail/text.hpp"
#include "caeigs/domain.hpp"
#include "caeigs/error.hpp"
#include "caeigs/ingest.hpp"
#include "caeigs/ladder.hpp"

namespace caeigs {

// Shape-preserving piecewise-cubic Hermite interpolant (Fritsch-Carlson
// derivatives with the three-point end conditions). Never overshoots the
// data between neighbouring knots.
class MonotoneCubic {
public:
    MonotoneCubic(std::vector<double> xs, std::vector<double> ys) : x_(std::move(xs)), y_(std::move(ys)) {
        if (x_.size() != y_.size() || x_.size() < 2) throw Error(Errc::too_few_points, "interpolant needs >= 2 knots");
        for (std::size_t i = 1; i < x_.size(); ++i) {
            if (!(x_[i] > x_[i - 1])) throw Error(Errc::invalid_config, "interpolant knots must strictly increase");
        }
        const std::size_t n = x_.size();
        std::vector<double> h(n - 1), delta(n - 1);
        for (std::size_t k = 0; k + 1 < n; ++k) {
            h[k] = x_[k + 1] - x_[k];
            delta[k] = (y_[k + 1] - y_[k]) / h[k];
        }
        d_.assign(n, 0.0);
        if (n == 2) {
            d_[0] = d_[1] = delta[0];
            return;
        }
        for (std::size_t k = 1; k + 1 < n; ++k) {
            if (delta[k - 1] * delta[k] <= 0.0) continue;
            const double w1 = 2.0 * h[k] + h[k - 1];
            const double w2 = h[k] + 2.0 * h[k - 1];
            d_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
        d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        d_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    }

    [[nodiscard]] double x_min() const noexcept { return x_.front(); }
    [[nodiscard]] double x_max() const noexcept { return x_.back(); }

    [[nodiscard]] double operator()(double x) const {
        const std::size_t k = segment(x);
        const double h = x_[k + 1] - x_[k];
        const double t = (x - x_[k]) / h;
        const double t2 = t * t;
        const double t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y_[k] + (t3 - 2 * t2 + t) * h * d_[k] + (-2 * t3 + 3 * t2) * y_[k + 1] +
               (t3 - t2) * h * d_[k + 1];
    }

    // Exact integral of the interpolant over [a, b] within the knot range.
    [[nodiscard]] double integrate(double a, double b) const {
        if (a > b) return -integrate(b, a);
        a = std::max(a, x_min());
        b = std::min(b, x_max());
        if (a >= b) return 0.0;
        double total = 0.0;
        for (std::size_t k = 0; k + 1 < x_.size(); ++k) {
            const double lo = std::max(a, x_[k]);
            const double hi = std::min(b, x_[k + 1]);
            if (lo >= hi) continue;
            const double h = x_[k + 1] - x_[k];
            total += primitive(k, (hi - x_[k]) / h) - primitive(k, (lo - x_[k]) / h);
        }
        return total;
    }

private:
    static double end_slope(double h0, double h1, double m0, double m1) {
        double d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if (std::signbit(d) != std::signbit(m0) || m0 == 0.0) {
            d = 0.0;
        } else if (std::signbit(m0) != std::signbit(m1) && std::abs(d) > 3.0 * std::abs(m0)) {
            d = 3.0 * m0;
        }
        return d;
    }

    [[nodiscard]] std::size_t segment(double x) const {
        if (x <= x_.front()) return 0;
        if (x >= x_.back()) return x_.size() - 2;
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        return static_cast<std::size_t>(it - x_.begin()) - 1;
    }

    // Antiderivative (in x) of segment k from its left knot to local t.
    [[nodiscard]] double primitive(std::size_t k, double t) const {
        const double h = x_[k + 1] - x_[k];
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
        const double b00 = t - t3 + 0.5 * t4;
        const double b10 = 0.5 * t2 - (2.0 / 3.0) * t3 + 0.25 * t4;
        const double b01 = t3 - 0.5 * t4;
        const double b11 = -t3 / 3.0 + 0.25 * t4;
        return h * (b00 * y_[k] + b10 * h * d_[k] + b01 * y_[k + 1] + b11 * h * d_[k + 1]);
    }

    std::vector<double> x_, y_, d_;
};

struct RDCurve {
    std::vector<RDPoint> points;  // rate ascending, quality ascending
};

inline void check_curve(const RDCurve& c) {
    if (c.points.size() < 2) throw Error(Errc::too_few_points, "rd curve needs >= 2 points");
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        if (!(c.points[i].rate > c.points[i - 1].rate) || !(c.points[i].quality > c.points[i - 1].quality)) {
            throw Error(Errc::invalid_config, "rd curve must be strictly increasing in rate and quality");
        }
        if (!(c.points[i - 1].rate > 0.0)) throw Error(Errc::invalid_config, "rd curve rates must be positive");
    }
}

// Average bitrate difference (%) at equal quality; negative means the test saves bits.
inline double bd_rate(const RDCurve& reference, const RDCurve& test) {
    check_curve(reference);
    check_curve(test);
    auto build = [](const RDCurve& c) {
        std::vector<double> q, lr;
        for (const auto& p : c.points) {
            q.push_back(p.quality);
            lr.push_back(std::log10(p.rate));
        }
        return MonotoneCubic(std::move(q), std::move(lr));
    };
    const auto ref = build(reference);
    const auto tst = build(test);
    const double lo = std::max(ref.x_min(), tst.x_min());
    const double hi = std::min(ref.x_max(), tst.x_max());
    if (!(hi > lo)) throw Error(Errc::no_overlap, "quality ranges do not overlap");
    const double avg = (tst.integrate(lo, hi) - ref.integrate(lo, hi)) / (hi - lo);
    return (std::pow(10.0, avg) - 1.0) * 100.0;
}

// Average quality difference at equal log-rate; positive means the test is better.
inline double bd_quality(const RDCurve& reference, const RDCurve& test) {
    check_curve(reference);
    check_curve(test);
    auto build = [](const RDCurve& c) {
        std::vector<double> lr, q;
        for (const auto& p : c.points) {
            lr.push_back(std::log10(p.rate));
            q.push_back(p.quality);
        }
        return MonotoneCubic(std::move(lr), std::move(q));
    };
    const auto ref = build(reference);
    const auto tst = build(test);
    const double lo = std::max(ref.x_min(), tst.x_min());
    const double hi = std::min(ref.x_max(), tst.x_max());
    if (!(hi > lo)) throw Error(Errc::no_overlap, "rate ranges do not overlap");
    return (tst.integrate(lo, hi) - ref.integrate(lo, hi)) / (hi - lo);
}

enum class Alternative { greater, less, two_sided };

struct WilcoxonResult {
    double p = 1.0;
    double statistic = 0.0;  // W+, sum of ranks of positive differences
    std::size_t n = 0;       // non-zero differences used
    bool exact = true;
    bool all_zero = false;   // every difference was zero; p = 1 by convention
};

inline constexpr std::size_t kWilcoxonExactMax = 25;

// Signed-rank test of x - y. Zero differences are dropped, tied magnitudes get
// midranks. Exact null distribution (by counting sign assignments) up to 25
// differences, otherwise a tie- and continuity-corrected normal approximation.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                           Alternative alt = Alternative::greater) {
    if (x.size() != y.size() || x.empty()) throw Error(Errc::invalid_config, "paired samples must be equal and non-empty");
    std::vector<double> d;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] - y[i] != 0.0) d.push_back(x[i] - y[i]);
    }
    WilcoxonResult r;
    r.n = d.size();
    if (d.empty()) {
        r.all_zero = true;
        return r;
    }
    const std::size_t n = d.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
    std::vector<long> twice_rank(n);  // midranks are half-integers
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const long two_r = static_cast<long>(i + j + 2);  // (i+1 + j+1)
        for (std::size_t k = i; k <= j; ++k) twice_rank[order[k]] = two_r;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    long observed = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] > 0.0) observed += twice_rank[i];
    }
    r.statistic = static_cast<double>(observed) / 2.0;

    if (n <= kWilcoxonExactMax) {
        const long total = std::accumulate(twice_rank.begin(), twice_rank.end(), 0L);
        std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
        count[0] = 1.0;
        long reach = 0;
        for (const long v : twice_rank) {
            reach += v;
            for (long s = reach; s >= v; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - v)];
        }
        double ge = 0.0, le = 0.0;
        for (long s = 0; s <= total; ++s) {
            if (s >= observed) ge += count[static_cast<std::size_t>(s)];
            if (s <= observed) le += count[static_cast<std::size_t>(s)];
        }
        const double all = std::ldexp(1.0, static_cast<int>(n));
        switch (alt) {
            case Alternative::greater: r.p = ge / all; break;
            case Alternative::less: r.p = le / all; break;
            case Alternative::two_sided: r.p = std::min(1.0, 2.0 * std::min(ge, le) / all); break;
        }
        return r;
    }

    r.exact = false;
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double sd = std::sqrt(var);
    auto upper_tail = [](double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); };
    switch (alt) {
        case Alternative::greater: r.p = upper_tail((r.statistic - mean - 0.5) / sd); break;
        case Alternative::less: r.p = 1.0 - upper_tail((r.statistic - mean + 0.5) / sd); break;
        case Alternative::two_sided:
            r.p = std::min(1.0, 2.0 * upper_tail((std::abs(r.statistic - mean) - 0.5) / sd));
            break;
    }
    r.p = std::clamp(r.p, std::numeric_limits<double>::min(), 1.0);
    return r;
}

// Paired Cohen's d: mean(x - y) / sample std(x - y).
inline double cohens_d(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(Errc::invalid_config, "cohen's d needs >= 2 pairs");
    const std::size_t n = x.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i] - y[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (x[i] - y[i] - mean) * (x[i] - y[i] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) throw Error(Errc::degenerate_variance, "differences have zero spread");
    return mean / sd;
}

inline std::string_view effect_size_class(double d) {
    d = std::abs(d);
    if (d < 0.2) return "small";
    if (d < 0.8) return "medium";
    return "large";
}

// A policy's resolution per (scene, target bitrate).
struct DecisionSet {
    std::vector<double> targets;                               // ascending
    std::map<SceneKey, std::vector<Resolution>> choices;       // aligned with targets
    std::map<SceneKey, std::vector<double>> probabilities;     // optional, CAE only

    friend bool operator==(const DecisionSet&, const DecisionSet&) = default;
};

inline DecisionSet static_decisions(const RQTable& table, std::span<const double> targets, const ZoneTable& zones) {
    DecisionSet set{{targets.begin(), targets.end()}, {}, {}};
    for (const auto& [key, pts] : table) {
        auto& row = set.choices[key];
        for (const double t : targets) row.push_back(zone_for_bitrate(zones, t).zone.static_resolution);
    }
    return set;
}

inline DecisionSet optimal_decisions(const RQTable& table, std::span<const double> targets, const ZoneTable& zones,
                                     Metric metric = Metric::vmaf) {
    DecisionSet set{{targets.begin(), targets.end()}, {}, {}};
    for (const auto& [key, pts] : table) {
        const auto ladder = optimal_ladder(pts, targets, zones, metric);
        auto& row = set.choices[key];
        for (const auto& e : ladder.entries) row.push_back(e.resolution);
    }
    return set;
}

inline void write_decisions(std::ostream& out, const DecisionSet& set) {
    out << "clip_id,scene_id,target_bitrate_mbps,resolution,probability\n";
    for (const auto& [key, row] : set.choices) {
        const auto prob = set.probabilities.find(key);
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << key.first << ',' << key.second << ',' << detail::format_double(set.targets[i]) << ',' << row[i] << ',';
            if (prob != set.probabilities.end()) out << detail::format_fixed(prob->second[i], 6);
            out << '\n';
        }
    }
}

inline DecisionSet parse_decisions(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::map<SceneKey, std::map<double, std::pair<Resolution, std::optional<double>>>> rows;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        const auto cells = detail::split(text, ',');
        auto bad = [&](const std::string& why) {
            return Error(Errc::malformed_row, "decisions line " + std::to_string(line_no) + ": " + why);
        };
        if (cells.size() < 4) throw bad("expected clip_id,scene_id,target_bitrate_mbps,resolution[,probability]");
        const auto target = detail::parse_double(cells[2]);
        const auto res = parse_resolution(cells[3]);
        if (!target || !res) throw bad("bad target or resolution");
        std::optional<double> prob;
        if (cells.size() >= 5 && !detail::trim(cells[4]).empty()) {
            prob = detail::parse_double(cells[4]);
            if (!prob) throw bad("bad probability");
        }
        SceneKey key{std::string(detail::trim(cells[0])), std::string(detail::trim(cells[1]))};
        if (!rows[key].emplace(*target, std::pair{*res, prob}).second) throw bad("duplicate decision");
    }
    DecisionSet set;
    for (const auto& [key, by_target] : rows) {
        std::vector<double> targets;
        for (const auto& [t, v] : by_target) targets.push_back(t);
        if (set.targets.empty()) set.targets = targets;
        if (targets != set.targets) {
            throw Error(Errc::grid_mismatch, "scene " + key.first + "/" + key.second + " uses a different bitrate grid");
        }
        auto& row = set.choices[key];
        std::vector<double> probs;
        for (const auto& [t, v] : by_target) {
            row.push_back(v.first);
            if (v.second) probs.push_back(*v.second);
        }
        if (probs.size() == row.size()) set.probabilities[key] = std::move(probs);
    }
    return set;
}

struct BdEntry {
    Metric metric = Metric::vmaf;
    std::optional<double> bd_rate;     // percent
    std::optional<double> bd_quality;  // metric units
    std::size_t scenes_rate = 0;       // scenes contributing to each mean
    std::size_t scenes_quality = 0;
};

struct SignificanceEntry {
    double target = 0.0;
    Metric metric = Metric::vmaf;
    WilcoxonResult wilcoxon;
    std::optional<double> d;  // absent when the differences have no spread
    bool significant = false;
};

struct ComparisonReport {
    std::vector<BdEntry> bd;
    std::optional<double> delta_framedrops;  // percentage points, test - reference
    std::vector<SignificanceEntry> significance;
};

struct DropStats {
    std::vector<double> reference_percent;  // per session
    std::vector<double> test_percent;
};

inline constexpr double kSignificanceLevel = 0.05;

// Filtered per-scene RD curve of the policy's chosen points.
inline std::optional<RDCurve> policy_curve(std::span<const RQPoint> pts, std::span<const double> targets,
                                           std::span<const Resolution> choice, Metric metric) {
    std::vector<RDPoint> raw;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const RQPoint& p = require_point(pts, choice[i], targets[i]);
        raw.push_back({p.measured_bitrate, p.q(metric)});
    }
    try {
        return RDCurve{enforce_convexity(std::move(raw))};
    } catch (const Error& e) {
        if (e.code() == Errc::too_few_points) return std::nullopt;
        throw;
    }
}

// Per-scene BD values averaged arithmetically; significance per target bitrate
// on the per-scene quality pairs (one-sided, test better than reference).
inline ComparisonReport evaluate_ladders(const RQTable& table, const DecisionSet& reference, const DecisionSet& test,
                                         std::span<const Metric> metrics, const std::optional<DropStats>& drops = {}) {
    if (reference.targets != test.targets) throw Error(Errc::grid_mismatch, "policies use different target bitrates");
    if (reference.choices.size() != test.choices.size()) throw Error(Errc::grid_mismatch, "policies cover different scenes");
    for (const auto& [key, row] : reference.choices) {
        const auto it = test.choices.find(key);
        if (it == test.choices.end()) throw Error(Errc::grid_mismatch, "scene " + key.first + "/" + key.second + " missing from test");
        if (row.size() != reference.targets.size() || it->second.size() != reference.targets.size()) {
            throw Error(Errc::grid_mismatch, "scene " + key.first + "/" + key.second + " has an incomplete row");
        }
        if (!table.contains(key)) throw Error(Errc::grid_mismatch, "scene " + key.first + "/" + key.second + " has no RQ data");
    }
    const auto& targets = reference.targets;
    ComparisonReport report;
    for (const Metric m : metrics) {
        BdEntry entry{m, std::nullopt, std::nullopt, 0, 0};
        double sum_rate = 0.0, sum_quality = 0.0;
        for (const auto& [key, ref_row] : reference.choices) {
            const auto& pts = table.at(key);
            const auto ref_curve = policy_curve(pts, targets, ref_row, m);
            const auto test_curve = policy_curve(pts, targets, test.choices.at(key), m);
            if (!ref_curve || !test_curve) continue;
            try {
                sum_rate += bd_rate(*ref_curve, *test_curve);
                ++entry.scenes_rate;
            } catch (const Error& e) {
                if (e.code() != Errc::no_overlap) throw;
            }
            try {
                sum_quality += bd_quality(*ref_curve, *test_curve);
                ++entry.scenes_quality;
            } catch (const Error& e) {
                if (e.code() != Errc::no_overlap) throw;
            }
        }
        if (entry.scenes_rate) entry.bd_rate = sum_rate / static_cast<double>(entry.scenes_rate);
        if (entry.scenes_quality) entry.bd_quality = sum_quality / static_cast<double>(entry.scenes_quality);
        report.bd.push_back(entry);
    }
    if (drops && !drops->reference_percent.empty() && !drops->test_percent.empty()) {
        auto mean = [](const std::vector<double>& v) {
            return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        };
        report.delta_framedrops = mean(drops->test_percent) - mean(drops->reference_percent);
    }
    for (std::size_t t = 0; t < targets.size(); ++t) {
        for (const Metric m : metrics) {
            std::vector<double> xs, ys;
            for (const auto& [key, ref_row] : reference.choices) {
                const auto& pts = table.at(key);
                xs.push_back(require_point(pts, test.choices.at(key)[t], targets[t]).q(m));
                ys.push_back(require_point(pts, ref_row[t], targets[t]).q(m));
            }
            SignificanceEntry s;
            s.target = targets[t];
            s.metric = m;
            s.wilcoxon = wilcoxon_signed_rank(xs, ys, Alternative::greater);
            if (xs.size() >= 2) {
                try {
                    s.d = cohens_d(xs, ys);
                } catch (const Error& e) {
                    if (e.code() != Errc::degenerate_variance) throw;
                }
            }
            s.significant = !s.wilcoxon.all_zero && s.wilcoxon.p < kSignificanceLevel;
            report.significance.push_back(s);
        }
    }
    return report;
}

namespace detail {

inline std::string opt_fixed(const std::optional<double>& v, int precision) {
    return v ? format_fixed(*v, precision) : std::string();
}

}  // namespace detail

// Machine-readable form: one row per BD metric, one Δframedrops row and one
// row per (target, metric) significance test.
inline void write_report_csv(std::ostream& out, const ComparisonReport& r) {
    out << "table,metric,target_mbps,bd_rate_pct,bd_quality,scenes,p,d,effect,delta_framedrops_pct\n";
    for (const auto& e : r.bd) {
        out << "bd," << to_string(e.metric) << ",," << detail::opt_fixed(e.bd_rate, 6) << ','
            << detail::opt_fixed(e.bd_quality, 6) << ',' << std::min(e.scenes_rate, e.scenes_quality) << ",,,,\n";
    }
    out << "framedrops,,,,,,,,," << detail::opt_fixed(r.delta_framedrops, 6) << '\n';
    for (const auto& s : r.significance) {
        out << "significance," << to_string(s.metric) << ',' << detail::format_double(s.target) << ",,,"
            << s.wilcoxon.n << ',' << detail::format_sci(s.wilcoxon.p, 4) << ',' << detail::opt_fixed(s.d, 4) << ','
            << (s.d ? effect_size_class(*s.d) : std::string_view("n/a")) << ",\n";
    }
}

inline void write_report_text(std::ostream& out, const ComparisonReport& r) {
    out << "BD metrics against the reference ladder\n";
    out << "  metric     BD-rate(%)   BD-quality   scenes\n";
    for (const auto& e : r.bd) {
        char line[160];
        std::snprintf(line, sizeof line, "  %-9s %11s %12s %8zu\n", std::string(to_string(e.metric)).c_str(),
                      e.bd_rate ? detail::format_fixed(*e.bd_rate, 2).c_str() : "n/a",
                      e.bd_quality ? detail::format_fixed(*e.bd_quality, 3).c_str() : "n/a",
                      std::min(e.scenes_rate, e.scenes_quality));
        out << line;
    }
    out << "  delta framedrops (%): " << (r.delta_framedrops ? detail::format_fixed(*r.delta_framedrops, 3) : "n/a")
        << "\n\nWilcoxon signed-rank (test > reference) and paired Cohen's d\n";
    out << "  target  metric        p            d      effect\n";
    for (const auto& s : r.significance) {
        char line[160];
        std::snprintf(line, sizeof line, "  %6s  %-9s %12s %8s   %s%s\n", detail::format_double(s.target).c_str(),
                      std::string(to_string(s.metric)).c_str(), detail::format_sci(s.wilcoxon.p, 2).c_str(),
                      s.d ? detail::format_fixed(*s.d, 2).c_str() : "n/a",
                      s.d ? std::string(effect_size_class(*s.d)).c_str() : "n/a", s.significant ? " *" : "");
        out << line;
    }
}

}  // namespace caeigs
