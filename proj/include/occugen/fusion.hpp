#pragma once

#include <vector>

#include "occugen/global_map.hpp"
#include "occugen/lidar.hpp"

namespace occugen {

/// Sensor and prediction measurement models. Predicted-occupied evidence is
/// deliberately weaker than sensed-occupied evidence.
struct FusionParams {
    double p_hit_sensor = 0.7;
    double p_miss_sensor = 0.4;
    double p_hit_diff = 0.6;
    double p_miss_diff = 0.45;

    void validate() const {
        for (double p : {p_hit_sensor, p_miss_sensor, p_hit_diff, p_miss_diff})
            if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("fusion probabilities must be in (0,1)");
        if (p_hit_sensor < 0.5 || p_hit_diff < 0.5)
            throw std::invalid_argument("hit probabilities must be at least 0.5");
        if (p_miss_sensor >= 0.5 || p_miss_diff >= 0.5)
            throw std::invalid_argument("miss probabilities must be below 0.5");
        if (p_hit_diff >= p_hit_sensor)
            throw std::invalid_argument("prediction evidence must be weaker than sensor evidence");
    }
};

/// Integrates one scan: every pass-through cell receives the miss likelihood,
/// every hit cell the hit likelihood (hit wins when a cell saw both within
/// the scan), and all touched cells join the observed set O.
inline void insert_scan(GlobalOccupancyMap& map, const Scan& scan, const FusionParams& params) {
    if (scan.resolution != map.resolution())
        throw std::invalid_argument("insert_scan scan/map resolution mismatch");

    const double hit_delta = logit(params.p_hit_sensor) - logit(map.prior());
    const double miss_delta = logit(params.p_miss_sensor) - logit(map.prior());

    VoxelKeySet hit_set(scan.hit_cells.begin(), scan.hit_cells.end());
    for (const VoxelKey& key : hit_set) map.apply_update(key, hit_delta, kProvenanceSensed);
    for (const VoxelKey& key : scan.free_cells)
        if (!hit_set.count(key)) map.apply_update(key, miss_delta, kProvenanceSensed);
}

/// Merges one diffusion prediction into the running map (the piecewise rule:
/// cells in the observed set O are left to the sensor branch and never
/// touched here). Binarized-occupied voxels receive the prediction hit
/// likelihood, the rest the prediction miss likelihood; fused cells gain
/// predicted provenance but never join O.
inline void fuse_prediction(GlobalOccupancyMap& map, const LocalGrid& prediction,
                            const MaskedSubmap& mask, const FusionParams& params,
                            double binarize_threshold = 0.5) {
    if (!prediction.same_shape(mask.grid) || prediction.resolution() != mask.grid.resolution())
        throw std::invalid_argument("fuse_prediction mask/prediction misaligned");
    const Pose& pp = prediction.origin_pose();
    const Pose& mp = mask.grid.origin_pose();
    if (pp.x != mp.x || pp.y != mp.y || pp.z != mp.z || pp.yaw != mp.yaw)
        throw std::invalid_argument("fuse_prediction mask/prediction window mismatch");
    if (prediction.resolution() != map.resolution())
        throw std::invalid_argument("fuse_prediction resolution mismatch");

    const double hit_delta = logit(params.p_hit_diff) - logit(map.prior());
    const double miss_delta = logit(params.p_miss_diff) - logit(map.prior());

    VoxelKeySet touched; // yaw-rotated windows can alias keys; update each once
    for (int iz = 0; iz < prediction.dim_z(); ++iz)
        for (int iy = 0; iy < prediction.dim_y(); ++iy)
            for (int ix = 0; ix < prediction.dim_x(); ++ix) {
                const Vec3 p = prediction.voxel_center_world(ix, iy, iz);
                const VoxelKey key = world_to_key(p, map.resolution());
                if (map.is_observed(key)) continue;
                if (!touched.insert(key).second) continue;
                const bool occ = prediction.at(ix, iy, iz) >= binarize_threshold;
                map.apply_update(key, occ ? hit_delta : miss_delta, kProvenancePredicted);
            }
}

/// One-shot merging: drops whatever the previous prediction contributed and
/// stamps the new prediction's occupied voxels straight into the map at the
/// clamp ceiling. The fire-and-forget baseline.
inline void osmm_merge(GlobalOccupancyMap& map, const LocalGrid& prediction,
                       double binarize_threshold = 0.5) {
    if (prediction.resolution() != map.resolution())
        throw std::invalid_argument("osmm_merge resolution mismatch");
    for (int iz = 0; iz < prediction.dim_z(); ++iz)
        for (int iy = 0; iy < prediction.dim_y(); ++iy)
            for (int ix = 0; ix < prediction.dim_x(); ++ix) {
                if (prediction.at(ix, iy, iz) < binarize_threshold) continue;
                const VoxelKey key =
                    world_to_key(prediction.voxel_center_world(ix, iy, iz), map.resolution());
                if (map.is_observed(key)) continue;
                map.overwrite(key, map.clamp_max(), kProvenancePredicted);
            }
}

/// Removes every cell that only predictions ever touched. Cells with sensor
/// history survive unchanged.
inline void clear_predictions(GlobalOccupancyMap& map) {
    std::vector<VoxelKey> doomed;
    for (const auto& [key, cell] : map.cells())
        if ((cell.provenance & kProvenancePredicted) && !(cell.provenance & kProvenanceSensed))
            doomed.push_back(key);
    for (const VoxelKey& key : doomed) map.erase(key);
}

/// Fraction of the target set the sensor has actually observed. Predicted
/// cells never count as explored.
inline double coverage(const GlobalOccupancyMap& map, const VoxelKeySet& target) {
    if (target.empty()) throw std::invalid_argument("coverage target must not be empty");
    size_t observed = 0;
    for (const VoxelKey& key : target)
        if (map.is_observed(key)) ++observed;
    return static_cast<double>(observed) / static_cast<double>(target.size());
}

} // namespace occugen
