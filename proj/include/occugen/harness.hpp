#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "occugen/config.hpp"
#include "occugen/explore.hpp"
#include "occugen/io.hpp"
#include "occugen/metrics.hpp"

namespace occugen {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

inline int occugen_threads() {
    if (const char* env = std::getenv("OCCUGEN_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace harness_detail {

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline void write_text_atomic(const fs::path& path, const std::string& body) {
    detail::atomic_write(path, [&](std::ofstream& out) { out << body; });
}

inline std::string trace_csv(const RunResult& result) {
    std::string csv = "tick,x,y,z,yaw,coverage,max_gain,mode,predictions_fused,path_length\n";
    for (const TickRow& row : result.trace) {
        csv += std::to_string(row.tick) + ',' + fmt(row.pose.x) + ',' + fmt(row.pose.y) + ',' +
               fmt(row.pose.z) + ',' + fmt(row.pose.yaw) + ',' + fmt(row.coverage) + ',' +
               fmt(row.max_gain) + ',' + to_string(row.mode) + ',' +
               std::to_string(row.predictions_fused) + ',' + fmt(row.path_length) + '\n';
    }
    return csv;
}

/// Rebuilds a MaskedSubmap from a saved window grid; extract_submap windows
/// only ever hold the exact values 1 (observed occupied), 0 (observed free)
/// and 0.5 (unknown).
inline MaskedSubmap submap_from_value_grid(const LocalGrid& grid) {
    MaskedSubmap m;
    m.grid = grid;
    m.occupied_mask.assign(grid.size(), 0);
    m.unoccupied_mask.assign(grid.size(), 0);
    for (size_t i = 0; i < grid.size(); ++i) {
        if (grid.values()[i] == 1.0f) m.occupied_mask[i] = 1;
        else if (grid.values()[i] == 0.0f) m.unoccupied_mask[i] = 1;
    }
    return m;
}

} // namespace harness_detail

/// Directory layout: every run lands in <out_dir>/<mode>/seed_<seed>/ so an
/// experiment grid accumulates under one root for cmd_evaluate.
inline fs::path run_dir(const RunConfig& cfg, ExploreMode mode, uint64_t seed) {
    return fs::path(cfg.out_dir) / to_string(mode) / ("seed_" + std::to_string(seed));
}

/// Executes one exploration run and persists trace, final map, windows,
/// prediction grids and the manifest. Returns the in-memory result.
inline RunResult execute_explore_run(const RunConfig& cfg, ExploreMode mode, uint64_t seed,
                                     const TrainedDenoiser* denoiser) {
    const ScenarioWorld scenario =
        make_world(cfg.scenario, seed, cfg.explore.grid.resolution);
    const Pose start = scenario.start_poses[seed % scenario.start_poses.size()];

    ExploreSettings settings = cfg.explore;
    settings.mode = mode;

    const auto t0 = std::chrono::steady_clock::now();
    ExplorationRun run(scenario, start, settings, denoiser, seed, occugen_threads());
    const RunResult& result = run.run();
    const double duration =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path dir = run_dir(cfg, mode, seed);
    fs::create_directories(dir / "windows");
    fs::create_directories(dir / "pred");

    harness_detail::write_text_atomic(dir / "trace.csv", harness_detail::trace_csv(result));
    save_global_map(run.map(), dir / "map.occm");

    ordered_json manifest;
    manifest["scenario"] = to_string(cfg.scenario);
    manifest["mode"] = to_string(mode);
    manifest["seed"] = seed;
    manifest["status"] = to_string(result.status);
    manifest["completed"] = run_completed(result.status);
    manifest["ticks"] = result.ticks;
    manifest["final_coverage"] = result.final_coverage;
    manifest["failure_to_start"] = result.failure_to_start;
    manifest["teleop_used"] = result.teleop_used;
    manifest["duration_seconds"] = duration;

    int ttc = -1;
    for (const TickRow& row : result.trace)
        if (row.coverage >= settings.coverage_target) {
            ttc = row.tick;
            break;
        }
    manifest["time_to_coverage_target"] = ttc;

    const auto dump_windows = [&](const std::vector<EvalWindow>& windows, const std::string& kind) {
        ordered_json arr = ordered_json::array();
        for (size_t i = 0; i < windows.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "windows/%s_%03zu.occv", kind.c_str(), i);
            char gt_name[64];
            std::snprintf(gt_name, sizeof(gt_name), "windows/%s_%03zu_gt.occv", kind.c_str(), i);
            save_grid(windows[i].observed.grid, dir / name);
            save_grid(windows[i].ground_truth, dir / gt_name);
            arr.push_back({{"map", name}, {"gt", gt_name}});
        }
        return arr;
    };
    manifest["windows_rc"] = dump_windows(result.windows_rc, "rc");
    manifest["windows_fc"] = dump_windows(result.windows_fc, "fc");

    ordered_json events = ordered_json::array();
    for (size_t e = 0; e < result.prediction_events.size(); ++e) {
        const PredictionEvent& ev = result.prediction_events[e];
        ordered_json je;
        je["tick"] = ev.tick;
        je["frontier"] = ev.frontier;
        je["unknown_fraction"] = ev.unknown_fraction;
        ordered_json grids = ordered_json::array();
        for (size_t k = 0; k < ev.grids.size(); ++k) {
            char name[64];
            std::snprintf(name, sizeof(name), "pred/ev%03zu_%zu.occv", e, k);
            save_grid(ev.grids[k], dir / name);
            grids.push_back(name);
        }
        je["grids"] = grids;
        events.push_back(je);
    }
    manifest["prediction_events"] = events;

    ordered_json paths = ordered_json::array();
    for (const PlannedPath& p : result.planned_paths) {
        ordered_json jp;
        jp["tick"] = p.tick;
        ordered_json wps = ordered_json::array();
        for (const Pose& wp : p.waypoints) wps.push_back({wp.x, wp.y, wp.z});
        jp["waypoints"] = wps;
        paths.push_back(jp);
    }
    manifest["planned_paths"] = paths;

    harness_detail::write_text_atomic(dir / "run.json", manifest.dump(2) + "\n");
    return result;
}

// ---------------------------------------------------------------------------
// Commands. Each returns the process exit code: 0 ok, 2 config, 3 io, 4 run.
// ---------------------------------------------------------------------------

struct TrainOutcome {
    double duration_seconds = 0.0;
    double first_loss = 0.0;
    double final_loss = 0.0;
    int steps = 0;
    size_t corpus_size = 0;
};

/// Builds the synthetic corpus, trains the denoiser and writes checkpoint +
/// loss curve.
inline TrainOutcome run_training(const RunConfig& cfg) {
    Rng rng(Rng::derive(cfg.train.optimizer.seed, 0xC0));
    std::vector<ScenarioWorld> worlds;
    worlds.reserve(cfg.train.n_worlds);
    for (int w = 0; w < cfg.train.n_worlds; ++w)
        worlds.push_back(make_world(Scenario::kRandomRooms, Rng::derive(cfg.train.optimizer.seed, w),
                                    cfg.explore.grid.resolution));

    const std::vector<LocalGrid> corpus = build_corpus(
        worlds, cfg.train.poses_per_world, cfg.train.augment_per_pose, cfg.explore.grid, rng);

    DenoiserModel model;
    model.init_weights(Rng::derive(cfg.train.optimizer.seed, 0x1417));

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<LossPoint> curve = train(model, corpus, cfg.train.optimizer, occugen_threads());
    const double duration =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(fs::path(cfg.checkpoint).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(cfg.checkpoint).parent_path());
    fs::create_directories(cfg.out_dir);

    TrainedDenoiser trained{std::move(model), cfg.train.optimizer.train_noise_steps,
                            cfg.train.optimizer.beta_start, cfg.train.optimizer.beta_end};
    save_denoiser(trained, cfg.checkpoint);

    std::string csv = "step,loss,lr\n";
    for (const LossPoint& p : curve)
        csv += std::to_string(p.step) + ',' + harness_detail::fmt(p.loss) + ',' +
               harness_detail::fmt(p.lr) + '\n';
    harness_detail::write_text_atomic(fs::path(cfg.out_dir) / "loss.csv", csv);

    TrainOutcome out;
    out.duration_seconds = duration;
    out.first_loss = curve.front().loss;
    out.final_loss = curve.back().loss;
    out.steps = static_cast<int>(curve.size());
    out.corpus_size = corpus.size();

    ordered_json meta;
    meta["corpus_size"] = out.corpus_size;
    meta["steps"] = out.steps;
    meta["duration_seconds"] = out.duration_seconds;
    meta["first_loss"] = out.first_loss;
    meta["final_loss"] = out.final_loss;
    harness_detail::write_text_atomic(fs::path(cfg.out_dir) / "train_meta.json",
                                      meta.dump(2) + "\n");
    return out;
}

inline int cmd_train(const RunConfig& cfg) {
    const TrainOutcome out = run_training(cfg);
    std::cout << "trained " << out.steps << " steps on " << out.corpus_size << " grids in "
              << harness_detail::fmt(out.duration_seconds) << " s; loss " << out.first_loss
              << " -> " << out.final_loss << "\n";
    std::cout << "checkpoint: " << cfg.checkpoint << "\n";
    return 0;
}

inline int cmd_explore(const RunConfig& cfg) {
    TrainedDenoiser trained;
    const TrainedDenoiser* denoiser = nullptr;
    if (mode_uses_predictions(cfg.explore.mode)) {
        trained = load_denoiser(cfg.checkpoint);
        denoiser = &trained;
    }
    const RunResult result = execute_explore_run(cfg, cfg.explore.mode, cfg.seed, denoiser);
    std::cout << to_string(cfg.explore.mode) << " seed " << cfg.seed << ": "
              << to_string(result.status) << ", coverage "
              << harness_detail::fmt(result.final_coverage) << " in " << result.ticks
              << " ticks -> " << run_dir(cfg, cfg.explore.mode, cfg.seed).string() << "\n";
    return 0;
}

/// Everything cmd_evaluate needs from one stored run.
struct LoadedRun {
    ordered_json manifest;
    std::vector<EvalWindow> windows_rc, windows_fc;
    std::vector<std::pair<bool, double>> event_unknown; // (frontier, unknown_fraction)
    std::vector<std::vector<LocalGrid>> rc_event_grids, fc_event_grids;
};

inline LoadedRun load_run(const fs::path& dir) {
    std::ifstream in(dir / "run.json");
    if (!in) throw io_error(IoErrorKind::kOpenFailed, "cannot open " + (dir / "run.json").string());
    LoadedRun run;
    in >> run.manifest;

    const auto load_windows = [&](const char* key) {
        std::vector<EvalWindow> windows;
        for (const auto& w : run.manifest.at(key)) {
            EvalWindow ew;
            ew.observed = harness_detail::submap_from_value_grid(
                load_grid(dir / w.at("map").get<std::string>()));
            ew.ground_truth = load_grid(dir / w.at("gt").get<std::string>());
            windows.push_back(std::move(ew));
        }
        return windows;
    };
    run.windows_rc = load_windows("windows_rc");
    run.windows_fc = load_windows("windows_fc");

    for (const auto& ev : run.manifest.at("prediction_events")) {
        const bool frontier = ev.at("frontier").get<bool>();
        run.event_unknown.push_back({frontier, ev.at("unknown_fraction").get<double>()});
        std::vector<LocalGrid> grids;
        for (const auto& g : ev.at("grids")) grids.push_back(load_grid(dir / g.get<std::string>()));
        (frontier ? run.fc_event_grids : run.rc_event_grids).push_back(std::move(grids));
    }
    return run;
}

struct ModeReport {
    ExploreMode mode;
    double fid_rc = 0.0, kid_rc = 0.0;
    double fid_fc = 0.0, kid_fc = 0.0;
    bool has_fc = false;
    double unknown_rc = 0.0, unknown_fc = 0.0;
    RunMetrics metrics_rc, metrics_fc;
    std::vector<double> per_seed_fid_rc, per_seed_fid_fc;
    std::vector<double> pred_iou_values_rc, pred_iou_values_fc;
    int completed = 0, failures = 0;
};

/// Per-mode Table-1-shaped evaluation across the configured seeds, one shared
/// embedder for every arm.
inline std::vector<ModeReport> evaluate_modes(const RunConfig& cfg) {
    const FeatureEmbedder embedder(cfg.evaluate.embedder_seed);
    std::vector<ModeReport> reports;

    std::string expect_scenario = to_string(cfg.scenario);
    for (ExploreMode mode : cfg.evaluate.modes) {
        ModeReport rep;
        rep.mode = mode;
        std::vector<EvalWindow> all_rc, all_fc;
        for (uint64_t seed : cfg.evaluate.seeds) {
            const fs::path dir = run_dir(cfg, mode, seed);
            LoadedRun run = load_run(dir);
            if (run.manifest.at("scenario").get<std::string>() != expect_scenario ||
                run.manifest.at("seed").get<uint64_t>() != seed)
                throw config_error("run at " + dir.string() + " does not match scenario/seed set");

            if (run.manifest.at("completed").get<bool>()) ++rep.completed;
            else ++rep.failures;

            if (run.windows_rc.size() >= 2) {
                const RunMetrics m = evaluate_run(run.windows_rc, embedder, cfg.evaluate.binarize_threshold);
                rep.per_seed_fid_rc.push_back(m.fid);
            }
            if (run.windows_fc.size() >= 2) {
                const RunMetrics m = evaluate_run(run.windows_fc, embedder, cfg.evaluate.binarize_threshold);
                rep.per_seed_fid_fc.push_back(m.fid);
            }
            for (auto& w : run.windows_rc) all_rc.push_back(std::move(w));
            for (auto& w : run.windows_fc) all_fc.push_back(std::move(w));

            const auto pred_ious = [&](const std::vector<std::vector<LocalGrid>>& events,
                                       std::vector<double>& sink) {
                for (const auto& grids : events) {
                    if (grids.size() < 2) continue;
                    std::vector<VoxelKeySet> occ;
                    for (const LocalGrid& g : grids)
                        occ.push_back(binarize(g, cfg.evaluate.binarize_threshold));
                    for (size_t i = 0; i < occ.size(); ++i)
                        for (size_t j = i + 1; j < occ.size(); ++j)
                            sink.push_back(iou(occ[i], occ[j]));
                }
            };
            pred_ious(run.rc_event_grids, rep.pred_iou_values_rc);
            pred_ious(run.fc_event_grids, rep.pred_iou_values_fc);
        }

        if (all_rc.size() >= 2) {
            rep.metrics_rc = evaluate_run(all_rc, embedder, cfg.evaluate.binarize_threshold);
            rep.fid_rc = rep.metrics_rc.fid;
            rep.kid_rc = rep.metrics_rc.kid_x1000;
            rep.unknown_rc = rep.metrics_rc.unknown_pct;
        }
        if (all_fc.size() >= 2) {
            rep.has_fc = true;
            rep.metrics_fc = evaluate_run(all_fc, embedder, cfg.evaluate.binarize_threshold);
            rep.fid_fc = rep.metrics_fc.fid;
            rep.kid_fc = rep.metrics_fc.kid_x1000;
            rep.unknown_fc = rep.metrics_fc.unknown_pct;
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

inline ordered_json report_to_json(const RunConfig& cfg, const std::vector<ModeReport>& reports) {
    ordered_json out;
    out["scenario"] = to_string(cfg.scenario);
    out["embedder_seed"] = cfg.evaluate.embedder_seed;
    ordered_json seeds = ordered_json::array();
    for (uint64_t s : cfg.evaluate.seeds) seeds.push_back(s);
    out["seeds"] = seeds;
    ordered_json rows = ordered_json::array();
    for (const ModeReport& r : reports) {
        ordered_json row;
        row["mode"] = to_string(r.mode);
        row["fid_rc"] = r.fid_rc;
        row["kid_x1000_rc"] = r.kid_rc;
        row["fid_fc"] = r.has_fc ? ordered_json(r.fid_fc) : ordered_json(nullptr);
        row["kid_x1000_fc"] = r.has_fc ? ordered_json(r.kid_fc) : ordered_json(nullptr);
        row["unknown_pct_rc"] = r.unknown_rc;
        row["unknown_pct_fc"] = r.has_fc ? ordered_json(r.unknown_fc) : ordered_json(nullptr);
        row["completed"] = r.completed;
        row["failures"] = r.failures;

        const auto pmf_json = [](const std::vector<double>& ious) {
            RunMetrics tmp;
            tmp.iou_values = ious;
            ordered_json arr = ordered_json::array();
            for (double p : tmp.iou_pmf()) arr.push_back(p);
            double mean = 0.0;
            for (double v : ious) mean += v;
            if (!ious.empty()) mean /= double(ious.size());
            return ordered_json{{"pmf", arr}, {"mean", mean}, {"count", ious.size()}};
        };
        row["pred_iou_rc"] = pmf_json(r.pred_iou_values_rc);
        row["pred_iou_fc"] = pmf_json(r.pred_iou_values_fc);
        rows.push_back(row);
    }
    out["modes"] = rows;
    return out;
}

inline int cmd_evaluate(const RunConfig& cfg) {
    const std::vector<ModeReport> reports = evaluate_modes(cfg);

    std::string csv = "mode,fid_rc,kid_x1000_rc,fid_fc,kid_x1000_fc,unknown_pct_rc,unknown_pct_fc,"
                      "completed,failures\n";
    for (const ModeReport& r : reports) {
        csv += std::string(to_string(r.mode)) + ',' + harness_detail::fmt(r.fid_rc) + ',' +
               harness_detail::fmt(r.kid_rc) + ',';
        csv += r.has_fc ? harness_detail::fmt(r.fid_fc) : "";
        csv += ',';
        csv += r.has_fc ? harness_detail::fmt(r.kid_fc) : "";
        csv += ',' + harness_detail::fmt(r.unknown_rc) + ',';
        csv += r.has_fc ? harness_detail::fmt(r.unknown_fc) : "";
        csv += ',' + std::to_string(r.completed) + ',' + std::to_string(r.failures) + '\n';
    }
    fs::create_directories(cfg.out_dir);
    harness_detail::write_text_atomic(fs::path(cfg.out_dir) / "report.csv", csv);
    harness_detail::write_text_atomic(fs::path(cfg.out_dir) / "report.json",
                                      report_to_json(cfg, reports).dump(2) + "\n");

    // Coverage-vs-time plot data per mode (tick, mean coverage, std).
    for (ExploreMode mode : cfg.evaluate.modes) {
        std::vector<std::vector<double>> curves;
        size_t max_len = 0;
        for (uint64_t seed : cfg.evaluate.seeds) {
            std::ifstream tr(run_dir(cfg, mode, seed) / "trace.csv");
            if (!tr) continue;
            std::vector<double> cov;
            std::string line;
            std::getline(tr, line); // header
            while (std::getline(tr, line)) {
                size_t pos = 0;
                for (int c = 0; c < 5; ++c) pos = line.find(',', pos) + 1;
                cov.push_back(std::stod(line.substr(pos)));
            }
            max_len = std::max(max_len, cov.size());
            curves.push_back(std::move(cov));
        }
        if (curves.empty()) continue;
        std::string cov_csv = "tick,mean_coverage,std_coverage\n";
        for (size_t t = 0; t < max_len; ++t) {
            double mean = 0.0, m2 = 0.0;
            int n = 0;
            for (const auto& c : curves) {
                const double v = t < c.size() ? c[t] : c.back();
                mean += v;
                ++n;
            }
            mean /= n;
            for (const auto& c : curves) {
                const double v = t < c.size() ? c[t] : c.back();
                m2 += (v - mean) * (v - mean);
            }
            const double sd = n > 1 ? std::sqrt(m2 / (n - 1)) : 0.0;
            cov_csv += std::to_string(t) + ',' + harness_detail::fmt(mean) + ',' +
                       harness_detail::fmt(sd) + '\n';
        }
        harness_detail::write_text_atomic(
            fs::path(cfg.out_dir) / ("coverage_" + std::string(to_string(mode)) + ".csv"), cov_csv);
    }

    for (const ModeReport& r : reports) {
        std::cout << to_string(r.mode) << ": FID_rc " << harness_detail::fmt(r.fid_rc)
                  << " KID_rc " << harness_detail::fmt(r.kid_rc);
        if (r.has_fc)
            std::cout << " | FID_fc " << harness_detail::fmt(r.fid_fc) << " KID_fc "
                      << harness_detail::fmt(r.kid_fc);
        std::cout << " | completed " << r.completed << " failures " << r.failures << "\n";
    }
    return 0;
}

inline int cmd_predict(const RunConfig& cfg, const std::string& map_file, const Pose& pose, int k,
                       uint64_t seed) {
    if (k < 1) throw config_error("k must be >= 1");
    const GlobalOccupancyMap map = load_global_map(map_file);
    const TrainedDenoiser trained = load_denoiser(cfg.checkpoint);

    Pose base = pose;
    base.yaw = 0.0;
    const Pose center = cfg.explore.grid.window_center(base);
    const MaskedSubmap mask = extract_submap(map, center, cfg.explore.grid.dx, cfg.explore.grid.dy,
                                             cfg.explore.grid.dz, cfg.explore.grid.resolution);

    const NoiseSchedule schedule = trained.make_schedule();
    const InferenceSchedule inference =
        InferenceSchedule::strided(trained.train_steps, cfg.explore.inference_steps);
    std::vector<uint64_t> seeds(k);
    for (int i = 0; i < k; ++i) seeds[i] = Rng::derive(seed, 0x9ull + i);
    const std::vector<LocalGrid> grids =
        sample_batch(std::cref(trained.model), mask, schedule, inference, seeds, occugen_threads());

    fs::create_directories(cfg.out_dir);
    save_grid(mask.grid, fs::path(cfg.out_dir) / "submap.occv");
    for (int i = 0; i < k; ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "prediction_%d.occv", i);
        save_grid(grids[i], fs::path(cfg.out_dir) / name);
    }
    std::cout << "wrote " << k << " prediction grids to " << cfg.out_dir << "\n";
    return 0;
}

/// Uniform error-to-exit-code mapping for the CLI: 0 ok, 2 config, 3 io,
/// 4 run failure; one machine-parsable line on stderr.
template <typename Fn>
inline int guard_command(Fn&& fn) {
    try {
        return fn();
    } catch (const config_error& e) {
        std::cerr << "OCCUGEN_ERROR code=2 kind=config msg=\"" << e.what() << "\"\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "OCCUGEN_ERROR code=2 kind=config msg=\"" << e.what() << "\"\n";
        return 2;
    } catch (const io_error& e) {
        std::cerr << "OCCUGEN_ERROR code=3 kind=io msg=\"" << e.what() << "\"\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "OCCUGEN_ERROR code=4 kind=run msg=\"" << e.what() << "\"\n";
        return 4;
    }
}

} // namespace occugen
