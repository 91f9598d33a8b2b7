#pragma once

#include <optional>
#include <vector>

#include "occugen/rng.hpp"
#include "occugen/voxel.hpp"
#include "occugen/world.hpp"

namespace occugen {

/// Spinning-lidar model. Rays are emitted on a (ring, azimuth) grid except
/// inside the blind cone under the sensor; a half-angle of pi/2 or more
/// blinds the unit entirely.
struct LidarConfig {
    int n_azimuth = 48;
    int n_rings = 16;
    double min_elev = -0.5236; // -30 deg
    double max_elev = 0.7854;  // +45 deg
    double max_range = 8.0;
    double blind_cone_half_angle = 1.0472; // 60 deg about straight down
    double mount_height = 0.6;             // sensor above robot foot
    double range_jitter_sigma = 0.0;       // optional Gaussian range noise
};

struct RaycastResult {
    std::optional<Vec3> hit;          // point on the first solid cell face
    std::optional<VoxelKey> hit_cell; // the solid cell itself
    std::vector<VoxelKey> traversed;  // pass-through cells in order (free and glass)
};

/// Casts a single ray through the ground-truth world. Glass and free cells
/// are passed through; the ray stops at the first solid cell, at max_range,
/// or when it leaves the world bounds.
inline RaycastResult raycast(const GroundTruthWorld& world, const Vec3& origin,
                             const Vec3& direction, double max_range) {
    if (!world.in_bounds(origin))
        throw std::invalid_argument("raycast origin outside world bounds");
    if (std::abs(direction.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("raycast direction must be normalized");

    RaycastResult result;
    const Vec3 end = origin + direction * max_range;
    traverse_segment(origin, end, world.resolution(), [&](const VoxelKey& key, double t_enter) {
        if (!world.in_bounds(key)) return false;
        if (world.material(key) == Material::kSolid) {
            result.hit = origin + direction * t_enter;
            result.hit_cell = key;
            return false;
        }
        result.traversed.push_back(key);
        return true;
    });
    return result;
}

/// One lidar sweep: hit points with their solid cells, plus the deduplicated
/// set of pass-through cells (the free-space evidence of the scan).
struct Scan {
    Vec3 origin;
    double resolution = 0.0;
    std::vector<Vec3> hit_points;
    std::vector<VoxelKey> hit_cells;
    VoxelKeySet free_cells;
};

/// Emits the sensor's ray directions for a pose; shared by scan simulation
/// and the planner's per-node gain raycasting.
template <typename Fn>
inline void for_each_ray_direction(const LidarConfig& cfg, double yaw, Fn&& fn) {
    const bool fully_blind = cfg.blind_cone_half_angle >= 1.5707963267948966 - 1e-12;
    for (int r = 0; r < cfg.n_rings; ++r) {
        const double elev = cfg.n_rings == 1
                                ? cfg.min_elev
                                : cfg.min_elev + (cfg.max_elev - cfg.min_elev) * r / (cfg.n_rings - 1);
        // Angle from straight down; inside the blind cone nothing is emitted.
        if (fully_blind || elev + 1.5707963267948966 < cfg.blind_cone_half_angle) continue;
        const double ce = std::cos(elev), se = std::sin(elev);
        for (int a = 0; a < cfg.n_azimuth; ++a) {
            const double az = yaw + 6.283185307179586 * a / cfg.n_azimuth;
            fn(Vec3{ce * std::cos(az), ce * std::sin(az), se});
        }
    }
}

/// Simulates one deterministic sweep from a robot foot pose (the sensor sits
/// mount_height above it). Optional range jitter draws from rng when enabled.
inline Scan simulate_scan(const GroundTruthWorld& world, const Pose& robot_pose,
                          const LidarConfig& cfg, Rng* rng = nullptr) {
    Scan scan;
    scan.origin = {robot_pose.x, robot_pose.y, robot_pose.z + cfg.mount_height};
    scan.resolution = world.resolution();
    if (!world.in_bounds(scan.origin))
        throw std::invalid_argument("simulate_scan pose outside world bounds");

    for_each_ray_direction(cfg, robot_pose.yaw, [&](const Vec3& dir) {
        double range = cfg.max_range;
        if (cfg.range_jitter_sigma > 0.0 && rng != nullptr)
            range = std::max(world.resolution(), range + cfg.range_jitter_sigma * rng->normal());
        const RaycastResult ray = raycast(world, scan.origin, dir, range);
        for (const VoxelKey& key : ray.traversed) scan.free_cells.insert(key);
        if (ray.hit) {
            scan.hit_points.push_back(*ray.hit);
            scan.hit_cells.push_back(*ray.hit_cell);
        }
    });
    return scan;
}

} // namespace occugen
