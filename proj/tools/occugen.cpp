#include <CLI11.hpp>

#include "occugen/harness.hpp"

using namespace occugen;

namespace {

RunConfig load_with_overrides(const std::string& config_path, const std::string& mode,
                              int64_t seed, const std::string& out_dir) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (!mode.empty()) cfg.explore.mode = mode_from_string(mode);
    if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"occugen: generative occupancy-map synthesis simulation harness"};
    app.require_subcommand(1);

    std::string config_path, mode, out_dir;
    int64_t seed = -1;
    app.add_option("--config", config_path, "JSON run config (all keys optional)");
    app.add_option("--mode", mode, "override: BL | SS-RC-OSMM | SS-RC-PMM | SS-FC-OSMM | SS-FC-PMM");
    app.add_option("--seed", seed, "override: run seed");
    app.add_option("--out", out_dir, "override: output directory");

    CLI::App* train = app.add_subcommand("train", "build a synthetic corpus and train the denoiser");
    CLI::App* explore = app.add_subcommand("explore", "run one exploration episode");

    CLI::App* evaluate = app.add_subcommand("evaluate", "aggregate stored runs into a report");

    CLI::App* predict = app.add_subcommand("predict", "sample predictions for a saved map at a pose");
    std::string map_file;
    std::vector<double> pose_vals;
    int k = 3;
    int64_t predict_seed = 1;
    predict->add_option("--map", map_file, "OCCM1 global map file")->required();
    predict->add_option("--pose", pose_vals, "robot foot pose: x y z [yaw]")->expected(3, 4);
    predict->add_option("--k", k, "number of predictions");
    predict->add_option("--predict-seed", predict_seed, "sampling seed");

    CLI11_PARSE(app, argc, argv);

    return guard_command([&]() -> int {
        RunConfig cfg = load_with_overrides(config_path, mode, seed, out_dir);
        if (train->parsed()) return cmd_train(cfg);
        if (explore->parsed()) return cmd_explore(cfg);
        if (evaluate->parsed()) return cmd_evaluate(cfg);
        if (predict->parsed()) {
            Pose pose;
            if (pose_vals.size() >= 3) {
                pose.x = pose_vals[0];
                pose.y = pose_vals[1];
                pose.z = pose_vals[2];
                if (pose_vals.size() == 4) pose.yaw = pose_vals[3];
            }
            return cmd_predict(cfg, map_file, pose, k, static_cast<uint64_t>(predict_seed));
        }
        return 2;
    });
}
