#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "occugen/explore.hpp"
#include "occugen/train.hpp"

namespace occugen {

class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Corpus generation knobs on top of the optimizer config.
struct TrainHarnessConfig {
    TrainConfig optimizer;
    int n_worlds = 8;
    int poses_per_world = 15;
    int augment_per_pose = 10;
};

struct EvaluateConfig {
    uint64_t embedder_seed = 17;
    double binarize_threshold = 0.5;
    std::vector<ExploreMode> modes = {ExploreMode::kBL, ExploreMode::kSSRCPMM,
                                      ExploreMode::kSSFCOSMM, ExploreMode::kSSFCPMM};
    std::vector<uint64_t> seeds = {1, 2, 3};
};

/// Everything one run needs. Every paper-silent constant lives here with its
/// default so experiments stay auditable from the config file alone.
struct RunConfig {
    Scenario scenario = Scenario::kSquareLoop;
    uint64_t seed = 1;
    std::string out_dir = "runs/out";
    std::string checkpoint = "runs/denoiser.occn";
    ExploreSettings explore;
    TrainHarnessConfig train;
    EvaluateConfig evaluate;
};

namespace cfgdetail {

using json = nlohmann::json;

/// Pulls a value with a default; type errors become config errors with the
/// offending key path.
template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw config_error("config key '" + key + "': " + e.what());
    }
}

inline void reject_unknown(const json& obj, const std::vector<std::string>& known,
                           const std::string& scope) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw config_error("unknown config key '" + scope + key + "'");
    }
}

inline GridSpec parse_grid(const json& j) {
    GridSpec g;
    reject_unknown(j, {"dx", "dy", "dz", "resolution", "floor_cells_below"}, "grid.");
    g.dx = get_or(j, "dx", g.dx);
    g.dy = get_or(j, "dy", g.dy);
    g.dz = get_or(j, "dz", g.dz);
    g.resolution = get_or(j, "resolution", g.resolution);
    g.floor_cells_below = get_or(j, "floor_cells_below", g.floor_cells_below);
    return g;
}

inline LidarConfig parse_lidar(const json& j) {
    LidarConfig l;
    reject_unknown(j,
                   {"n_azimuth", "n_rings", "min_elev", "max_elev", "max_range",
                    "blind_cone_half_angle", "mount_height", "range_jitter_sigma"},
                   "lidar.");
    l.n_azimuth = get_or(j, "n_azimuth", l.n_azimuth);
    l.n_rings = get_or(j, "n_rings", l.n_rings);
    l.min_elev = get_or(j, "min_elev", l.min_elev);
    l.max_elev = get_or(j, "max_elev", l.max_elev);
    l.max_range = get_or(j, "max_range", l.max_range);
    l.blind_cone_half_angle = get_or(j, "blind_cone_half_angle", l.blind_cone_half_angle);
    l.mount_height = get_or(j, "mount_height", l.mount_height);
    l.range_jitter_sigma = get_or(j, "range_jitter_sigma", l.range_jitter_sigma);
    return l;
}

inline FusionParams parse_fusion(const json& j) {
    FusionParams f;
    reject_unknown(j, {"p_hit_sensor", "p_miss_sensor", "p_hit_diff", "p_miss_diff"}, "fusion.");
    f.p_hit_sensor = get_or(j, "p_hit_sensor", f.p_hit_sensor);
    f.p_miss_sensor = get_or(j, "p_miss_sensor", f.p_miss_sensor);
    f.p_hit_diff = get_or(j, "p_hit_diff", f.p_hit_diff);
    f.p_miss_diff = get_or(j, "p_miss_diff", f.p_miss_diff);
    return f;
}

inline PlannerParams parse_planner(const json& j) {
    PlannerParams p;
    reject_unknown(j,
                   {"gamma_s", "gamma_d", "min_frontier_spacing", "max_frontier_nodes",
                    "sample_count", "connect_radius", "fc_range", "rc_radius", "body_height",
                    "support_below_min", "support_below_max", "support_radius_cells"},
                   "planner.");
    p.gamma_s = get_or(j, "gamma_s", p.gamma_s);
    p.gamma_d = get_or(j, "gamma_d", p.gamma_d);
    p.min_frontier_spacing = get_or(j, "min_frontier_spacing", p.min_frontier_spacing);
    p.max_frontier_nodes = get_or(j, "max_frontier_nodes", p.max_frontier_nodes);
    p.sample_count = get_or(j, "sample_count", p.sample_count);
    p.connect_radius = get_or(j, "connect_radius", p.connect_radius);
    p.fc_range = get_or(j, "fc_range", p.fc_range);
    p.rc_radius = get_or(j, "rc_radius", p.rc_radius);
    p.body_height = get_or(j, "body_height", p.body_height);
    p.support_below_min = get_or(j, "support_below_min", p.support_below_min);
    p.support_below_max = get_or(j, "support_below_max", p.support_below_max);
    p.support_radius_cells = get_or(j, "support_radius_cells", p.support_radius_cells);
    return p;
}

inline void parse_explore(const json& j, ExploreSettings& e) {
    reject_unknown(j,
                   {"k_predictions", "inference_steps", "tick_budget", "coverage_target",
                    "gain_epsilon", "stuck_ticks", "speed", "pred_every", "eval_every",
                    "startup_grace_ticks", "teleop_assist"},
                   "explore.");
    e.k_predictions = get_or(j, "k_predictions", e.k_predictions);
    e.inference_steps = get_or(j, "inference_steps", e.inference_steps);
    e.tick_budget = get_or(j, "tick_budget", e.tick_budget);
    e.coverage_target = get_or(j, "coverage_target", e.coverage_target);
    e.gain_epsilon = get_or(j, "gain_epsilon", e.gain_epsilon);
    e.stuck_ticks = get_or(j, "stuck_ticks", e.stuck_ticks);
    e.speed = get_or(j, "speed", e.speed);
    e.pred_every = get_or(j, "pred_every", e.pred_every);
    e.eval_every = get_or(j, "eval_every", e.eval_every);
    e.startup_grace_ticks = get_or(j, "startup_grace_ticks", e.startup_grace_ticks);
    e.teleop_assist = get_or(j, "teleop_assist", e.teleop_assist);
}

inline TrainHarnessConfig parse_train(const json& j) {
    TrainHarnessConfig t;
    reject_unknown(j,
                   {"batch_size", "epochs", "max_steps", "warmup_steps", "lr_min", "lr_max",
                    "train_noise_steps", "beta_start", "beta_end", "seed", "n_worlds",
                    "poses_per_world", "augment_per_pose"},
                   "train.");
    t.optimizer.batch_size = get_or(j, "batch_size", t.optimizer.batch_size);
    t.optimizer.epochs = get_or(j, "epochs", t.optimizer.epochs);
    t.optimizer.max_steps = get_or(j, "max_steps", t.optimizer.max_steps);
    t.optimizer.warmup_steps = get_or(j, "warmup_steps", t.optimizer.warmup_steps);
    t.optimizer.lr_min = get_or(j, "lr_min", t.optimizer.lr_min);
    t.optimizer.lr_max = get_or(j, "lr_max", t.optimizer.lr_max);
    t.optimizer.train_noise_steps = get_or(j, "train_noise_steps", t.optimizer.train_noise_steps);
    t.optimizer.beta_start = get_or(j, "beta_start", t.optimizer.beta_start);
    t.optimizer.beta_end = get_or(j, "beta_end", t.optimizer.beta_end);
    t.optimizer.seed = get_or(j, "seed", t.optimizer.seed);
    t.n_worlds = get_or(j, "n_worlds", t.n_worlds);
    t.poses_per_world = get_or(j, "poses_per_world", t.poses_per_world);
    t.augment_per_pose = get_or(j, "augment_per_pose", t.augment_per_pose);
    return t;
}

inline EvaluateConfig parse_evaluate(const json& j) {
    EvaluateConfig e;
    reject_unknown(j, {"embedder_seed", "binarize_threshold", "modes", "seeds"}, "evaluate.");
    e.embedder_seed = get_or(j, "embedder_seed", e.embedder_seed);
    e.binarize_threshold = get_or(j, "binarize_threshold", e.binarize_threshold);
    if (j.contains("modes")) {
        e.modes.clear();
        for (const auto& m : j.at("modes")) e.modes.push_back(mode_from_string(m.get<std::string>()));
    }
    if (j.contains("seeds")) {
        e.seeds.clear();
        for (const auto& s : j.at("seeds")) e.seeds.push_back(s.get<uint64_t>());
    }
    return e;
}

} // namespace cfgdetail

inline RunConfig parse_config(const nlohmann::json& j) {
    using namespace cfgdetail;
    RunConfig cfg;
    reject_unknown(j,
                   {"scenario", "seed", "mode", "out_dir", "checkpoint", "grid", "lidar", "fusion",
                    "planner", "explore", "train", "evaluate"},
                   "");
    if (j.contains("scenario")) cfg.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    cfg.seed = get_or(j, "seed", cfg.seed);
    if (j.contains("mode")) cfg.explore.mode = mode_from_string(j.at("mode").get<std::string>());
    cfg.out_dir = get_or<std::string>(j, "out_dir", cfg.out_dir);
    cfg.checkpoint = get_or<std::string>(j, "checkpoint", cfg.checkpoint);
    if (j.contains("grid")) cfg.explore.grid = parse_grid(j.at("grid"));
    if (j.contains("lidar")) cfg.explore.lidar = parse_lidar(j.at("lidar"));
    if (j.contains("fusion")) cfg.explore.fusion = parse_fusion(j.at("fusion"));
    if (j.contains("planner")) cfg.explore.planner = parse_planner(j.at("planner"));
    if (j.contains("explore")) parse_explore(j.at("explore"), cfg.explore);
    if (j.contains("train")) cfg.train = parse_train(j.at("train"));
    if (j.contains("evaluate")) cfg.evaluate = parse_evaluate(j.at("evaluate"));

    try {
        cfg.explore.validate();
        cfg.train.optimizer.validate();
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }
    if (cfg.explore.k_predictions < 1 || cfg.explore.k_predictions > 16)
        throw config_error("k_predictions out of supported range");
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config parse error: " + std::string(e.what()));
    }
    return parse_config(j);
}

} // namespace occugen
