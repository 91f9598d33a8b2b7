#pragma once

#include <optional>
#include <string>
#include <vector>

#include "occugen/denoiser.hpp"
#include "occugen/diffusion.hpp"
#include "occugen/fusion.hpp"
#include "occugen/metrics.hpp"
#include "occugen/planner.hpp"
#include "occugen/train.hpp"
#include "occugen/world.hpp"

namespace occugen {

/// The experiment grid: sensor-only baseline, then SceneSense with
/// robot-centric or frontier-centric prediction windows crossed with one-shot
/// or probabilistic merging.
enum class ExploreMode { kBL, kSSRCOSMM, kSSRCPMM, kSSFCOSMM, kSSFCPMM };

inline const char* to_string(ExploreMode m) {
    switch (m) {
        case ExploreMode::kBL: return "BL";
        case ExploreMode::kSSRCOSMM: return "SS-RC-OSMM";
        case ExploreMode::kSSRCPMM: return "SS-RC-PMM";
        case ExploreMode::kSSFCOSMM: return "SS-FC-OSMM";
        case ExploreMode::kSSFCPMM: return "SS-FC-PMM";
    }
    return "?";
}

inline ExploreMode mode_from_string(const std::string& s) {
    if (s == "BL") return ExploreMode::kBL;
    if (s == "SS-RC-OSMM") return ExploreMode::kSSRCOSMM;
    if (s == "SS-RC-PMM") return ExploreMode::kSSRCPMM;
    if (s == "SS-FC-OSMM") return ExploreMode::kSSFCOSMM;
    if (s == "SS-FC-PMM") return ExploreMode::kSSFCPMM;
    throw std::invalid_argument("unknown mode: " + s);
}

inline bool mode_uses_predictions(ExploreMode m) { return m != ExploreMode::kBL; }
inline bool mode_frontier_centric(ExploreMode m) {
    return m == ExploreMode::kSSFCOSMM || m == ExploreMode::kSSFCPMM;
}
inline bool mode_probabilistic(ExploreMode m) {
    return m == ExploreMode::kSSRCPMM || m == ExploreMode::kSSFCPMM;
}

struct ExploreSettings {
    ExploreMode mode = ExploreMode::kBL;
    GridSpec grid;
    LidarConfig lidar;
    FusionParams fusion;
    PlannerParams planner;
    int k_predictions = 3;   // samples merged per window
    int inference_steps = 30;
    int tick_budget = 120;
    double coverage_target = 0.95;
    double gain_epsilon = 0.5;
    int stuck_ticks = 25;
    double speed = 0.8;      // meters advanced along the path per tick
    int pred_every = 2;      // prediction cadence in ticks
    int eval_every = 5;      // evaluation-window cadence in ticks
    int startup_grace_ticks = 5;
    bool teleop_assist = true;

    void validate() const {
        grid.validate();
        fusion.validate();
        planner.validate();
        if (k_predictions < 1) throw std::invalid_argument("k_predictions must be >= 1");
        if (inference_steps < 1) throw std::invalid_argument("inference_steps must be >= 1");
        if (tick_budget < 1) throw std::invalid_argument("tick_budget must be >= 1");
        if (!(coverage_target > 0.0 && coverage_target <= 1.0))
            throw std::invalid_argument("coverage_target must be in (0,1]");
        if (speed <= 0.0) throw std::invalid_argument("speed must be positive");
        if (pred_every < 1 || eval_every < 1) throw std::invalid_argument("cadences must be >= 1");
    }
};

enum class RunStatus {
    kRunning,
    kCompletedCoverage,
    kCompletedGainExhausted,
    kFailedStuck,
    kFailedBudget,
    kFailedCollision,
};

inline const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::kRunning: return "running";
        case RunStatus::kCompletedCoverage: return "completed_coverage";
        case RunStatus::kCompletedGainExhausted: return "completed_gain_exhausted";
        case RunStatus::kFailedStuck: return "failed_stuck";
        case RunStatus::kFailedBudget: return "failed_budget";
        case RunStatus::kFailedCollision: return "failed_collision";
    }
    return "?";
}

inline bool run_completed(RunStatus s) {
    return s == RunStatus::kCompletedCoverage || s == RunStatus::kCompletedGainExhausted;
}

struct TickRow {
    int tick = 0;
    Pose pose;
    double coverage = 0.0;
    double max_gain = 0.0;
    ExploreMode mode = ExploreMode::kBL;
    int predictions_fused = 0;
    double path_length = 0.0;
};

struct PredictionEvent {
    int tick = 0;
    bool frontier = false;
    Pose center;
    double unknown_fraction = 0.0;
    std::vector<LocalGrid> grids;
};

struct PlannedPath {
    int tick = 0;
    std::vector<Pose> waypoints;
};

struct RunResult {
    RunStatus status = RunStatus::kRunning;
    int ticks = 0;
    double final_coverage = 0.0;
    bool failure_to_start = false; // planner had no valid graph at startup
    bool teleop_used = false;
    std::vector<TickRow> trace;
    std::vector<EvalWindow> windows_rc, windows_fc;
    std::vector<PredictionEvent> prediction_events;
    std::vector<PlannedPath> planned_paths;
};

/// One simulated exploration run: sense, merge predictions, plan, move.
/// Deterministic for fixed (settings, seed, world); prediction sampling may
/// fan out over max_threads without changing results.
class ExplorationRun {
public:
    ExplorationRun(const ScenarioWorld& scenario, const Pose& start, const ExploreSettings& settings,
                   const TrainedDenoiser* denoiser, uint64_t seed, int max_threads = 1)
        : scenario_(scenario), settings_(settings), denoiser_(denoiser), seed_(seed),
          max_threads_(max_threads), map_(scenario.world.resolution()), robot_(start) {
        settings_.validate();
        if (mode_uses_predictions(settings_.mode)) {
            if (denoiser_ == nullptr)
                throw std::invalid_argument("SS modes need a denoiser checkpoint");
            schedule_ = denoiser_->make_schedule();
            inference_ = InferenceSchedule::strided(denoiser_->train_steps, settings_.inference_steps);
        }
    }

    const GlobalOccupancyMap& map() const { return map_; }
    const Pose& robot() const { return robot_; }
    const RunResult& result() const { return result_; }

    /// Runs ticks until termination; returns the final result.
    const RunResult& run() {
        while (result_.status == RunStatus::kRunning) tick();
        return result_;
    }

    /// One loop iteration; advances the run state machine.
    void tick() {
        if (result_.status != RunStatus::kRunning) return;
        const int tick_idx = result_.ticks;

        // Sense and integrate.
        const Scan scan = simulate_scan(scenario_.world, robot_, settings_.lidar);
        insert_scan(map_, scan, settings_.fusion);

        // Predict and merge.
        int fused = 0;
        if (mode_uses_predictions(settings_.mode) && tick_idx % settings_.pred_every == 0)
            fused = run_predictions(tick_idx);

        // Plan.
        ExplorationGraph graph = rebuild_graph(tick_idx);
        const bool plannable = graph.vertices.size() > 1;
        double max_gain = 0.0;
        int best = -1;
        for (size_t i = 1; i < graph.vertices.size(); ++i)
            if (graph.vertices[i].exploration_gain > max_gain) {
                max_gain = graph.vertices[i].exploration_gain;
                best = static_cast<int>(i);
            }

        last_frontiers_.clear();
        if (!graph.empty())
            for (int v : select_frontiers(graph, settings_.planner))
                if (v != 0) last_frontiers_.push_back(graph.vertices[v].pose);

        // Record evaluation windows before moving.
        if (tick_idx % settings_.eval_every == 0) record_windows(graph);

        const double cov = coverage(map_, scenario_.target);

        double path_len = 0.0;
        if (!plannable) {
            handle_no_plan(tick_idx);
        } else {
            const std::vector<int> path = graph.path_to(best);
            PlannedPath planned{tick_idx, {}};
            for (int idx : path) planned.waypoints.push_back(graph.vertices[idx].pose);
            path_len = graph.vertices[best].path_length;
            result_.planned_paths.push_back(planned);
            advance_along(planned.waypoints);
        }

        result_.trace.push_back({tick_idx, robot_, cov, max_gain, settings_.mode, fused, path_len});
        result_.ticks = tick_idx + 1;
        result_.final_coverage = cov;

        // Termination.
        if (result_.status != RunStatus::kRunning) return;
        if (cov >= settings_.coverage_target) {
            result_.status = RunStatus::kCompletedCoverage;
        } else if (plannable && tick_idx > settings_.startup_grace_ticks &&
                   max_gain < settings_.gain_epsilon) {
            result_.status = RunStatus::kCompletedGainExhausted;
        } else if (cov > best_coverage_ + 1e-6) {
            best_coverage_ = cov;
            last_progress_tick_ = tick_idx;
        } else if (tick_idx - last_progress_tick_ > settings_.stuck_ticks) {
            result_.status = RunStatus::kFailedStuck;
        }
        if (result_.status == RunStatus::kRunning && result_.ticks >= settings_.tick_budget)
            result_.status = RunStatus::kFailedBudget;
    }

private:
    int run_predictions(int tick_idx) {
        std::vector<Pose> centers;
        if (mode_frontier_centric(settings_.mode) && !last_frontiers_.empty()) {
            centers = last_frontiers_;
        } else {
            // Robot-centric window; frontier mode falls back to the robot at
            // startup so planning can begin.
            centers.push_back(robot_);
        }

        const bool frontier_kind = mode_frontier_centric(settings_.mode) && !last_frontiers_.empty();
        int fused = 0;
        for (size_t ci = 0; ci < centers.size(); ++ci) {
            Pose window_pose = centers[ci];
            window_pose.yaw = 0.0; // prediction windows are axis-aligned
            const Pose center = settings_.grid.window_center(window_pose);
            const MaskedSubmap mask = extract_submap(map_, center, settings_.grid.dx,
                                                     settings_.grid.dy, settings_.grid.dz,
                                                     settings_.grid.resolution);

            std::vector<uint64_t> seeds(settings_.k_predictions);
            for (int k = 0; k < settings_.k_predictions; ++k)
                seeds[k] = Rng::derive(seed_, 0xD1F000ull + uint64_t(tick_idx) * 977 + ci * 31 + k);

            std::vector<LocalGrid> grids =
                sample_batch(std::cref(denoiser_->model), mask, schedule_, inference_, seeds,
                             max_threads_);

            if (mode_probabilistic(settings_.mode)) {
                for (const LocalGrid& g : grids) fuse_prediction(map_, g, mask, settings_.fusion);
            } else {
                // Fire and forget: each new prediction replaces the last.
                for (const LocalGrid& g : grids) {
                    clear_predictions(map_);
                    osmm_merge(map_, g);
                }
            }
            fused += static_cast<int>(grids.size());

            PredictionEvent ev;
            ev.tick = tick_idx;
            ev.frontier = frontier_kind;
            ev.center = center;
            ev.unknown_fraction = mask.unknown_fraction();
            ev.grids = std::move(grids);
            result_.prediction_events.push_back(std::move(ev));
        }
        return fused;
    }

    ExplorationGraph rebuild_graph(int tick_idx) {
        Rng rng(Rng::derive(seed_, 0x9AFFull + tick_idx));
        return build_graph(map_, robot_, settings_.planner, settings_.lidar, rng);
    }

    void record_windows(const ExplorationGraph& graph) {
        const auto cut = [&](const Pose& foot) {
            Pose base = foot;
            base.yaw = 0.0;
            const Pose center = settings_.grid.window_center(base);
            EvalWindow w;
            w.observed = extract_submap(map_, center, settings_.grid.dx, settings_.grid.dy,
                                        settings_.grid.dz, settings_.grid.resolution);
            w.ground_truth = world_submap(scenario_.world, center, settings_.grid.dx,
                                          settings_.grid.dy, settings_.grid.dz,
                                          settings_.grid.resolution);
            return w;
        };
        result_.windows_rc.push_back(cut(robot_));
        if (!last_frontiers_.empty()) result_.windows_fc.push_back(cut(last_frontiers_.front()));
    }

    void handle_no_plan(int tick_idx) {
        if (tick_idx <= settings_.startup_grace_ticks) result_.failure_to_start = true;
        if (!settings_.teleop_assist) return;
        // Operator nudge: a short step through world-traversable space.
        result_.teleop_used = true;
        for (int attempt = 0; attempt < 8; ++attempt) {
            const double yaw = robot_.yaw + attempt * 0.7853981633974483;
            Pose cand = robot_;
            cand.x += 0.6 * std::cos(yaw);
            cand.y += 0.6 * std::sin(yaw);
            cand.yaw = yaw;
            const VoxelKey body = world_to_key({cand.x, cand.y, cand.z + 0.5 * map_.resolution()},
                                               map_.resolution());
            if (scenario_.world.traversable(body)) {
                robot_ = cand;
                return;
            }
        }
    }

    void advance_along(const std::vector<Pose>& waypoints) {
        double budget = settings_.speed;
        Pose pos = robot_;
        for (size_t i = 1; i < waypoints.size() && budget > 0.0; ++i) {
            const double dx = waypoints[i].x - pos.x;
            const double dy = waypoints[i].y - pos.y;
            const double seg = std::sqrt(dx * dx + dy * dy);
            if (seg < 1e-9) continue;
            const double step = std::min(seg, budget);
            pos.x += dx / seg * step;
            pos.y += dy / seg * step;
            pos.yaw = std::atan2(dy, dx);
            budget -= step;
        }
        robot_ = pos;
        // The simulator enforces what the map cannot see: solid or glass
        // cells are physically impassable.
        const VoxelKey body =
            world_to_key({robot_.x, robot_.y, robot_.z + 0.5 * map_.resolution()}, map_.resolution());
        if (!scenario_.world.traversable(body)) result_.status = RunStatus::kFailedCollision;
    }

    const ScenarioWorld& scenario_;
    ExploreSettings settings_;
    const TrainedDenoiser* denoiser_;
    uint64_t seed_;
    int max_threads_;

    GlobalOccupancyMap map_;
    Pose robot_;
    NoiseSchedule schedule_;
    InferenceSchedule inference_;
    std::vector<Pose> last_frontiers_;
    RunResult result_;
    double best_coverage_ = 0.0;
    int last_progress_tick_ = 0;
};

} // namespace occugen
