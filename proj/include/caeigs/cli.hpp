#pragma once
// Single-binary pipeline driver. Requires CLI11 on the include path.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "caeigs/caeigs.hpp"

namespace caeigs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr std::uint64_t kDefaultSeed = 42;

namespace detail {

namespace fs = std::filesystem;

// Temp file in the destination directory, then rename over the target.
inline void write_atomic(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::io, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out.flush()) throw Error(Errc::io, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(Errc::io, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

template <typename Fn>
void write_text(const fs::path& path, Fn&& fn) {
    std::ostringstream out;
    fn(out);
    write_atomic(path, out.str());
}

// Library errors raised inside `fn` get the path prepended.
template <typename Fn>
auto about(const std::string& path, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

template <typename Fn>
auto read_file(const std::string& path, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read " + path);
    return about(path, [&] { return fn(in); });
}

inline ZoneTable load_zones(const std::string& path) {
    if (path.empty()) return default_zone_table();
    ZoneTable zones = read_file(path, [](std::istream& in) { return parse_zone_table(in); });
    if (const auto problems = validate_zone_table(zones); !problems.empty()) {
        throw Error(Errc::invalid_config, path + ": " + problems.front());
    }
    return zones;
}

inline RQTable load_rq(const std::string& path) {
    return read_file(path, [](std::istream& in) { return parse_rq_table(in); });
}

inline std::vector<FrameStats> load_stats(const std::string& path) {
    return read_file(path, [](std::istream& in) { return parse_stats_log(in); });
}

inline std::vector<Metric> to_metrics(const std::vector<std::string>& names) {
    std::vector<Metric> out;
    for (const auto& n : names) out.push_back(*parse_metric(n));
    if (out.empty()) out.assign(kAllMetrics.begin(), kAllMetrics.end());
    return out;
}

inline std::string bundle_name(int zone_id) { return "zone" + std::to_string(zone_id) + ".caew"; }

inline BundleSet load_bundles(const std::string& dir, const ZoneTable& zones) {
    BundleSet set;
    for (const auto& z : zones.zones) {
        const auto path = (fs::path(dir) / bundle_name(z.id)).string();
        if (!fs::exists(path)) throw Error(Errc::missing_bundle, path + ": no weights for zone " + std::to_string(z.id));
        try {
            set.emplace(z.id, load_weights_file(path));
        } catch (const Error& e) {
            throw Error(e.code(), path + ": " + e.what());
        }
    }
    return set;
}

// One value per line after a header; '#' lines are comments.
inline std::vector<double> parse_column(std::istream& in, const std::string& what) {
    std::vector<double> out;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = caeigs::detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        const auto cells = caeigs::detail::split(text, ',');
        const auto v = caeigs::detail::parse_double(cells.back());
        if (!v) throw Error(Errc::malformed_row, what + " line " + std::to_string(line_no) + ": not a number");
        out.push_back(*v);
    }
    return out;
}

inline std::map<std::string, double> parse_scene_complexities(std::istream& in) {
    std::map<std::string, double> out;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = caeigs::detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        const auto cells = caeigs::detail::split(text, ',');
        const auto v = cells.size() == 3 ? caeigs::detail::parse_double(cells[2]) : std::nullopt;
        if (!v) throw Error(Errc::malformed_row, "scenes line " + std::to_string(line_no) + ": expected clip_id,scene_id,complexity");
        out[std::string(caeigs::detail::trim(cells[1]))] = *v;
    }
    return out;
}

// Drop percentage from a session summary's leading comment.
inline double parse_summary_drop_percent(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
        const auto pos = line.find("drop_percent=");
        if (pos != std::string::npos) {
            const auto v = caeigs::detail::parse_double(caeigs::detail::trim(std::string_view(line).substr(pos + 13)));
            if (v) return *v;
        }
    }
    throw Error(Errc::malformed_row, "no drop_percent in session summary");
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using detail::fs::path;
    CLI::App app{"Content-adaptive resolution selection for game streaming"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    std::string zones_path;
    std::uint64_t seed = kDefaultSeed;
    auto add_zones = [&](CLI::App* sub) {
        sub->add_option("--zones", zones_path, "Zone table file (key = value lines); default table when omitted");
    };
    auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed, "Random seed")->capture_default_str(); };
    const auto metric_check = CLI::IsMember({"vmaf", "psnr_y", "ssim_yb"});

    // gen-synthetic
    auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic stats log, RQ table and scene complexities");
    SyntheticConfig gen_cfg;
    std::string gen_out;
    add_seed(gen);
    gen->add_option("--out", gen_out, "Output directory (stats.jsonl, rq.csv, scenes.csv)")->required();
    gen->add_option("--scenes", gen_cfg.n_scenes, "Number of scenes")->capture_default_str();
    gen->add_option("--frames-per-scene", gen_cfg.frames_per_scene, "Frames per scene (>= 61)")->capture_default_str();
    gen->add_option("--noise", gen_cfg.noise_level, "Relative noise on the per-line statistics")->capture_default_str();
    gen->add_option("--quality-noise", gen_cfg.quality_noise, "Additive VMAF noise per RQ point")->capture_default_str();
    gen->add_option("--clip", gen_cfg.clip_id, "Clip identifier")->capture_default_str();

    // hull
    auto* hull_cmd = app.add_subcommand("hull", "Upper convex hull per scene");
    std::string hull_rq, hull_out, hull_metric = "vmaf";
    hull_cmd->add_option("--rq", hull_rq, "RQ table (CSV)")->required();
    hull_cmd->add_option("--metric", hull_metric, "Quality metric")->check(metric_check)->capture_default_str();
    hull_cmd->add_option("--out", hull_out, "Output CSV of hull points")->required();

    // label
    auto* label_cmd = app.add_subcommand("label", "Hull-derived binary labels per scene and zone");
    std::string label_rq, label_out, label_metric = "vmaf";
    std::vector<double> label_targets = default_label_targets();
    add_zones(label_cmd);
    label_cmd->add_option("--rq", label_rq, "RQ table (CSV)")->required();
    label_cmd->add_option("--metric", label_metric, "Quality metric")->check(metric_check)->capture_default_str();
    label_cmd->add_option("--targets", label_targets, "Label bitrate per zone, in zone order (Mbps)")
        ->delimiter(',')
        ->capture_default_str();
    label_cmd->add_option("--out", label_out, "Output labels CSV")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train one classifier per zone");
    std::string train_stats, train_labels, train_out, train_layout = "frames";
    TrainConfig train_cfg;
    add_zones(train_cmd);
    add_seed(train_cmd);
    train_cmd->add_option("--stats", train_stats, "Stats log (JSON lines), scenes in label order")->required();
    train_cmd->add_option("--labels", train_labels, "Labels CSV from `label`")->required();
    train_cmd->add_option("--iterations", train_cfg.iterations, "Adam iterations per zone")->capture_default_str();
    train_cmd->add_option("--batch", train_cfg.batch_size, "Minibatch size")->capture_default_str()->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", train_cfg.adam.lr, "Adam learning rate")->capture_default_str();
    train_cmd->add_option("--validation", train_cfg.validation_fraction, "Held-out fraction for checkpointing")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 0.5));
    train_cmd->add_option("--layout", train_layout, "Input layout")
        ->check(CLI::IsMember({"frames", "features"}))
        ->capture_default_str();
    train_cmd->add_option("--out", train_out, "Output directory for zone<N>.caew and loss.csv")->required();

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "Per-scene resolution decisions over a bitrate grid");
    std::string infer_mode = "cae", infer_rq, infer_stats, infer_weights, infer_out, infer_metric = "vmaf";
    std::vector<double> infer_targets = {2.0, 3.5, 7.5, 12.5, 17.5};
    add_zones(infer_cmd);
    infer_cmd->add_option("--mode", infer_mode, "Policy")->check(CLI::IsMember({"cae", "static", "optimal"}))->capture_default_str();
    infer_cmd->add_option("--rq", infer_rq, "RQ table (defines the scenes)")->required();
    infer_cmd->add_option("--stats", infer_stats, "Stats log (cae mode)");
    infer_cmd->add_option("--weights", infer_weights, "Directory with zone<N>.caew (cae mode)");
    infer_cmd->add_option("--metric", infer_metric, "Metric for the optimal ladder")->check(metric_check)->capture_default_str();
    infer_cmd->add_option("--targets", infer_targets, "Target bitrates (Mbps)")->delimiter(',')->capture_default_str();
    infer_cmd->add_option("--out", infer_out, "Output decisions CSV")->required();

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Replay a session through the engine and the channel model");
    std::string sim_policy = "cae", sim_stats, sim_scenes, sim_weights, sim_labels, sim_cc, sim_out, sim_summary;
    double cc_low = 1.5, cc_high = 20.0, sim_threshold = 2.0, sim_fps = 60.0;
    add_zones(sim_cmd);
    add_seed(sim_cmd);
    sim_cmd->add_option("--policy", sim_policy, "Decision policy")
        ->check(CLI::IsMember({"cae", "static", "oracle"}))
        ->capture_default_str();
    sim_cmd->add_option("--stats", sim_stats, "Stats log (JSON lines)")->required();
    sim_cmd->add_option("--scenes", sim_scenes, "Scene complexities CSV from gen-synthetic (drives frame sizes)")->required();
    sim_cmd->add_option("--weights", sim_weights, "Directory with zone<N>.caew (cae policy)");
    sim_cmd->add_option("--labels", sim_labels, "Labels CSV (oracle policy)");
    sim_cmd->add_option("--cc", sim_cc, "CC trace CSV, one Mbps value per frame; generated from --seed when omitted");
    sim_cmd->add_option("--cc-low", cc_low, "Lower bound of the generated CC trace (Mbps)")->capture_default_str();
    sim_cmd->add_option("--cc-high", cc_high, "Upper bound of the generated CC trace (Mbps)")->capture_default_str();
    sim_cmd->add_option("--drop-threshold", sim_threshold, "Queue delay budget in frame intervals")->capture_default_str();
    sim_cmd->add_option("--fps", sim_fps, "Frame rate")->capture_default_str();
    sim_cmd->add_option("--out", sim_out, "Per-frame decision log CSV")->required();
    sim_cmd->add_option("--summary", sim_summary, "Session summary CSV");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "BD metrics and significance of a test ladder against a reference");
    std::string eval_rq, eval_ref, eval_test, eval_out, eval_ref_summary, eval_test_summary;
    std::vector<std::string> eval_metrics;
    eval_cmd->add_option("--rq", eval_rq, "RQ table (CSV)")->required();
    eval_cmd->add_option("--reference", eval_ref, "Reference decisions CSV")->required();
    eval_cmd->add_option("--test", eval_test, "Test decisions CSV")->required();
    eval_cmd->add_option("--metric", eval_metrics, "Metric(s) to report; all when omitted")->check(metric_check);
    eval_cmd->add_option("--reference-summary", eval_ref_summary, "Session summary of the reference policy");
    eval_cmd->add_option("--test-summary", eval_test_summary, "Session summary of the test policy");
    eval_cmd->add_option("--out", eval_out, "Report CSV")->required();

    // stats-test
    auto* st_cmd = app.add_subcommand("stats-test", "Wilcoxon signed-rank test and paired Cohen's d on x,y pairs");
    std::string st_in, st_out, st_alt = "greater";
    st_cmd->add_option("--pairs", st_in, "CSV with header and x,y columns")->required();
    st_cmd->add_option("--alternative", st_alt, "Alternative hypothesis for x - y")
        ->check(CLI::IsMember({"greater", "less", "two-sided"}))
        ->capture_default_str();
    st_cmd->add_option("--out", st_out, "Result CSV; printed to stdout when omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) {
            gen_cfg.seed = seed;
            const auto session = generate_synthetic_session(gen_cfg);
            const path dir(gen_out);
            detail::write_text(dir / "stats.jsonl", [&](std::ostream& o) { write_stats_log(o, session.frames); });
            detail::write_text(dir / "rq.csv", [&](std::ostream& o) { write_rq_table(o, group_rq_points(session.rq_points)); });
            detail::write_text(dir / "scenes.csv", [&](std::ostream& o) {
                o << "clip_id,scene_id,complexity\n";
                for (std::size_t s = 0; s < session.complexities.size(); ++s) {
                    o << gen_cfg.clip_id << ',' << scene_id(s) << ',' << caeigs::detail::format_double(session.complexities[s]) << '\n';
                }
            });
        } else if (*hull_cmd) {
            const auto table = detail::load_rq(hull_rq);
            const Metric m = *parse_metric(hull_metric);
            detail::write_text(hull_out, [&](std::ostream& o) {
                o << "clip_id,scene_id,resolution,target_bitrate_mbps,measured_bitrate_mbps," << to_string(m) << '\n';
                for (const auto& [key, pts] : table) {
                    for (const auto& p : upper_convex_hull(pts, m).points) {
                        o << key.first << ',' << key.second << ',' << p.resolution << ','
                          << caeigs::detail::format_double(p.target_bitrate) << ','
                          << caeigs::detail::format_double(p.measured_bitrate) << ','
                          << caeigs::detail::format_double(p.q(m)) << '\n';
                    }
                }
            });
        } else if (*label_cmd) {
            const auto zones = detail::load_zones(zones_path);
            const auto table = detail::load_rq(label_rq);
            const auto labels = label_scenes(table, zones, label_targets, *parse_metric(label_metric));
            detail::write_text(label_out, [&](std::ostream& o) { write_labels(o, labels); });
        } else if (*train_cmd) {
            const auto zones = detail::load_zones(zones_path);
            const auto labels = detail::read_file(train_labels, [](std::istream& in) { return parse_labels(in); });
            if (labels.targets.size() != zones.zones.size()) {
                throw Error(Errc::grid_mismatch, train_labels + ": labels cover " + std::to_string(labels.targets.size()) +
                                                     " zones, table has " + std::to_string(zones.zones.size()));
            }
            const auto frames = detail::load_stats(train_stats);
            const auto norm = compute_normalization(frame_matrices(frames));
            const auto samples = detail::about(train_stats, [&] { return scene_samples(frames, keys_of(labels.labels), norm); });
            train_cfg.normalization = norm;
            train_cfg.layout = train_layout == "frames" ? Layout::frames_as_channels : Layout::features_as_channels;
            std::ostringstream loss_csv;
            loss_csv << "zone,iteration,batch_loss,validation_loss\n";
            std::vector<std::pair<path, std::vector<std::uint8_t>>> outputs;
            for (std::size_t z = 0; z < zones.zones.size(); ++z) {
                train_cfg.zone_id = zones.zones[z].id;
                const Dataset ds = zone_dataset(samples, labels, z);
                TrainResult r;
                try {
                    r = train(ds, train_cfg, seed + z);
                } catch (const Error& e) {
                    throw Error(e.code(), train_labels + ": zone " + std::to_string(train_cfg.zone_id) + ": " + e.what());
                }
                std::map<std::size_t, double> val(r.validation.begin(), r.validation.end());
                for (std::size_t i = 0; i < r.loss_history.size(); ++i) {
                    loss_csv << train_cfg.zone_id << ',' << i + 1 << ',' << caeigs::detail::format_fixed(r.loss_history[i], 8) << ',';
                    if (const auto it = val.find(i + 1); it != val.end()) loss_csv << caeigs::detail::format_fixed(it->second, 8);
                    loss_csv << '\n';
                }
                outputs.emplace_back(path(train_out) / detail::bundle_name(train_cfg.zone_id), save_weights(r.bundle));
            }
            for (const auto& [p, bytes] : outputs) {
                detail::write_atomic(p, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
            }
            detail::write_atomic(path(train_out) / "loss.csv", loss_csv.str());
        } else if (*infer_cmd) {
            const auto zones = detail::load_zones(zones_path);
            const auto table = detail::load_rq(infer_rq);
            DecisionSet set;
            if (infer_mode == "static") {
                set = static_decisions(table, infer_targets, zones);
            } else if (infer_mode == "optimal") {
                set = optimal_decisions(table, infer_targets, zones, *parse_metric(infer_metric));
            } else {
                if (infer_stats.empty() || infer_weights.empty()) {
                    throw CLI::RequiredError("cae mode needs --stats and --weights");
                }
                const auto bundles = detail::load_bundles(infer_weights, zones);
                const auto frames = detail::load_stats(infer_stats);
                // Each bundle carries its own normalization; they are identical when trained together.
                const auto samples = detail::about(infer_stats, [&] {
                    return scene_samples(frames, keys_of(table), bundles.begin()->second.normalization);
                });
                set = cae_decisions(samples, infer_targets, zones, bundles);
            }
            detail::write_text(infer_out, [&](std::ostream& o) { write_decisions(o, set); });
        } else if (*sim_cmd) {
            const auto zones = detail::load_zones(zones_path);
            const auto frames = detail::load_stats(sim_stats);
            const auto complexity = detail::read_file(sim_scenes, [](std::istream& in) { return detail::parse_scene_complexities(in); });
            const auto scenes = split_scenes(frames);
            if (scenes.size() != complexity.size()) {
                throw Error(Errc::stream_length_mismatch, sim_scenes + ": " + std::to_string(complexity.size()) +
                                                              " scenes listed, stats log has " + std::to_string(scenes.size()));
            }
            std::vector<double> per_frame;
            auto it = complexity.begin();
            for (const auto& s : scenes) {
                per_frame.insert(per_frame.end(), s.size(), it->second);
                ++it;
            }
            std::vector<double> cc;
            if (sim_cc.empty()) {
                cc = generate_cc_trace(seed, frames.size(), cc_low, cc_high, sim_fps);
            } else {
                cc = detail::read_file(sim_cc, [&](std::istream& in) {
                    auto v = detail::parse_column(in, "cc trace");
                    if (v.size() != frames.size()) {
                        throw Error(Errc::stream_length_mismatch, std::to_string(v.size()) + " CC samples for " +
                                                                      std::to_string(frames.size()) + " frames");
                    }
                    return v;
                });
            }
            Policy policy = StaticPolicy{};
            if (sim_policy == "cae") {
                if (sim_weights.empty()) throw CLI::RequiredError("cae policy needs --weights");
                policy = CaePolicy{std::make_shared<const BundleSet>(detail::load_bundles(sim_weights, zones))};
            } else if (sim_policy == "oracle") {
                if (sim_labels.empty()) throw CLI::RequiredError("oracle policy needs --labels");
                const auto labels = detail::read_file(sim_labels, [](std::istream& in) { return parse_labels(in); });
                OraclePolicy oracle;
                for (const auto& [key, row] : labels.labels) oracle.labels.push_back(row);
                policy = std::move(oracle);
            }
            SyntheticConfig size_cfg;
            size_cfg.seed = seed;
            size_cfg.fps = sim_fps;
            const SyntheticSizeModel sizes(size_cfg, per_frame);
            ChannelModel channel;
            channel.fps = sim_fps;
            channel.drop_threshold = sim_threshold;
            const auto report = simulate_session(frames, cc, zones, policy, channel,
                                                 [&](std::size_t i, Resolution r, double c, bool idr) { return sizes(i, r, c, idr); });
            detail::write_text(sim_out, [&](std::ostream& o) { write_decision_log(o, report); });
            if (!sim_summary.empty()) detail::write_text(sim_summary, [&](std::ostream& o) { write_session_summary(o, report); });
            out << "frames " << report.frames.size() << ", dropped " << report.dropped << " ("
                << caeigs::detail::format_fixed(report.drop_percent(), 3) << "%)\n";
        } else if (*eval_cmd) {
            const auto table = detail::load_rq(eval_rq);
            const auto ref = detail::read_file(eval_ref, [](std::istream& in) { return parse_decisions(in); });
            const auto test = detail::read_file(eval_test, [](std::istream& in) { return parse_decisions(in); });
            std::optional<DropStats> drops;
            if (!eval_ref_summary.empty() && !eval_test_summary.empty()) {
                DropStats d;
                d.reference_percent.push_back(detail::read_file(eval_ref_summary, detail::parse_summary_drop_percent));
                d.test_percent.push_back(detail::read_file(eval_test_summary, detail::parse_summary_drop_percent));
                drops = d;
            }
            const auto report = evaluate_ladders(table, ref, test, detail::to_metrics(eval_metrics), drops);
            detail::write_text(eval_out, [&](std::ostream& o) { write_report_csv(o, report); });
            write_report_text(out, report);
        } else if (*st_cmd) {
            const auto pairs = detail::read_file(st_in, [](std::istream& in) {
                std::vector<double> x, y;
                std::string line;
                std::size_t line_no = 0;
                bool header = false;
                while (std::getline(in, line)) {
                    ++line_no;
                    const auto text = caeigs::detail::trim(line);
                    if (text.empty() || text.front() == '#') continue;
                    if (!header) {
                        header = true;
                        continue;
                    }
                    const auto cells = caeigs::detail::split(text, ',');
                    const auto a = cells.size() == 2 ? caeigs::detail::parse_double(cells[0]) : std::nullopt;
                    const auto b = cells.size() == 2 ? caeigs::detail::parse_double(cells[1]) : std::nullopt;
                    if (!a || !b) throw Error(Errc::malformed_row, "line " + std::to_string(line_no) + ": expected x,y");
                    x.push_back(*a);
                    y.push_back(*b);
                }
                return std::pair{x, y};
            });
            const Alternative alt = st_alt == "greater" ? Alternative::greater
                                    : st_alt == "less"  ? Alternative::less
                                                        : Alternative::two_sided;
            const auto w = wilcoxon_signed_rank(pairs.first, pairs.second, alt);
            std::optional<double> d;
            if (pairs.first.size() >= 2) {
                try {
                    d = cohens_d(pairs.first, pairs.second);
                } catch (const Error& e) {
                    if (e.code() != Errc::degenerate_variance) throw;
                }
            }
            std::ostringstream o;
            o << "n,statistic,p,exact,all_zero,d,effect\n"
              << w.n << ',' << caeigs::detail::format_double(w.statistic) << ',' << caeigs::detail::format_sci(w.p, 6) << ','
              << (w.exact ? 1 : 0) << ',' << (w.all_zero ? 1 : 0) << ','
              << (d ? caeigs::detail::format_fixed(*d, 6) : std::string()) << ','
              << (d ? effect_size_class(*d) : std::string_view("n/a")) << '\n';
            if (st_out.empty()) {
                out << o.str();
            } else {
                detail::write_atomic(st_out, o.str());
            }
        }
    } catch (const CLI::Error& e) {
        err << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitOk;
}

}  // namespace caeigs::cli
