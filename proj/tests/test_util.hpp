#pragma once

#include <set>
#include <vector>

#include "occugen/lidar.hpp"
#include "occugen/world.hpp"

namespace occugen::testutil {

/// Exact segment/AABB overlap via the slab method; the reference predicate
/// for "this voxel is intersected by the ray segment".
inline bool segment_intersects_cell(const Vec3& a, const Vec3& b, const VoxelKey& key, double res) {
    const double lo[3] = {key.i * res, key.j * res, key.k * res};
    const double hi[3] = {(key.i + 1) * res, (key.j + 1) * res, (key.k + 1) * res};
    const double p[3] = {a.x, a.y, a.z};
    const double d[3] = {b.x - a.x, b.y - a.y, b.z - a.z};
    double t0 = 0.0, t1 = 1.0;
    for (int ax = 0; ax < 3; ++ax) {
        if (std::abs(d[ax]) < 1e-15) {
            if (p[ax] < lo[ax] || p[ax] > hi[ax]) return false;
            continue;
        }
        double ta = (lo[ax] - p[ax]) / d[ax];
        double tb = (hi[ax] - p[ax]) / d[ax];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

/// Dense-sampling traversal oracle: cells touched by stepping along the
/// segment at res/steps_per_cell.
inline std::set<VoxelKey> sampled_cells(const Vec3& a, const Vec3& b, double res,
                                        int steps_per_cell = 10) {
    std::set<VoxelKey> cells;
    const double len = (b - a).norm();
    const int n = std::max(2, static_cast<int>(std::ceil(len / res * steps_per_cell)));
    for (int i = 0; i <= n; ++i) {
        const double f = double(i) / n;
        cells.insert(world_to_key(a + (b - a) * f, res));
    }
    return cells;
}

/// One-room test world: floor at z in [0,res), free above, no walls/ceiling
/// unless asked.
inline GroundTruthWorld flat_world(int nx, int ny, int nz, double res) {
    GroundTruthWorld w(nx, ny, nz, res);
    w.fill_box({0, 0, 0}, {nx * res, ny * res, res}, Material::kSolid);
    return w;
}

} // namespace occugen::testutil
