#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>

namespace occugen {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        if (n <= 0.0) throw std::invalid_argument("cannot normalize zero vector");
        return {x / n, y / n, z / n};
    }
};

/// World pose of a robot or grid window: position plus heading.
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double yaw = 0.0;

    Vec3 position() const { return {x, y, z}; }
};

/// Integer voxel index in a global lattice. World position of the cell's
/// min corner is origin + index * resolution.
struct VoxelKey {
    int32_t i = 0;
    int32_t j = 0;
    int32_t k = 0;

    bool operator==(const VoxelKey& o) const { return i == o.i && j == o.j && k == o.k; }
    bool operator!=(const VoxelKey& o) const { return !(*this == o); }
    bool operator<(const VoxelKey& o) const {
        if (i != o.i) return i < o.i;
        if (j != o.j) return j < o.j;
        return k < o.k;
    }
};

struct VoxelKeyHash {
    size_t operator()(const VoxelKey& k) const {
        // 3D variant of the classic large-prime mix; adequate spread for
        // desk-scale maps.
        uint64_t h = static_cast<uint64_t>(static_cast<uint32_t>(k.i)) * 73856093ull;
        h ^= static_cast<uint64_t>(static_cast<uint32_t>(k.j)) * 19349669ull;
        h ^= static_cast<uint64_t>(static_cast<uint32_t>(k.k)) * 83492791ull;
        h *= 0x9e3779b97f4a7c15ull;
        return static_cast<size_t>(h ^ (h >> 32));
    }
};

inline VoxelKey world_to_key(const Vec3& p, double resolution) {
    return {static_cast<int32_t>(std::floor(p.x / resolution)),
            static_cast<int32_t>(std::floor(p.y / resolution)),
            static_cast<int32_t>(std::floor(p.z / resolution))};
}

inline Vec3 key_center(const VoxelKey& k, double resolution) {
    return {(k.i + 0.5) * resolution, (k.j + 0.5) * resolution, (k.k + 0.5) * resolution};
}

/// Walks the voxels a segment passes through, in order, starting at the cell
/// containing `from`. Calls visit(key, t_enter) for each cell; stops early if
/// visit returns false. 3D DDA over the infinite lattice.
template <typename Visit>
inline void traverse_segment(const Vec3& from, const Vec3& to, double resolution, Visit&& visit) {
    const Vec3 d = to - from;
    const double seg_len = d.norm();
    VoxelKey key = world_to_key(from, resolution);
    if (seg_len <= 0.0) {
        visit(key, 0.0);
        return;
    }

    const double inv_len = 1.0 / seg_len;
    const double dir[3] = {d.x * inv_len, d.y * inv_len, d.z * inv_len};
    const double pos[3] = {from.x, from.y, from.z};
    int32_t idx[3] = {key.i, key.j, key.k};

    int step[3];
    double t_max[3];   // distance until the ray crosses the next cell boundary per axis
    double t_delta[3]; // distance between successive boundary crossings per axis
    for (int a = 0; a < 3; ++a) {
        if (dir[a] > 0.0) {
            step[a] = 1;
            const double next_boundary = (idx[a] + 1) * resolution;
            t_max[a] = (next_boundary - pos[a]) / dir[a];
            t_delta[a] = resolution / dir[a];
        } else if (dir[a] < 0.0) {
            step[a] = -1;
            const double next_boundary = idx[a] * resolution;
            t_max[a] = (next_boundary - pos[a]) / dir[a];
            t_delta[a] = -resolution / dir[a];
        } else {
            step[a] = 0;
            t_max[a] = std::numeric_limits<double>::infinity();
            t_delta[a] = std::numeric_limits<double>::infinity();
        }
    }

    double t = 0.0;
    while (true) {
        if (!visit(VoxelKey{idx[0], idx[1], idx[2]}, t)) return;
        int axis = 0;
        if (t_max[1] < t_max[axis]) axis = 1;
        if (t_max[2] < t_max[axis]) axis = 2;
        if (t_max[axis] > seg_len) return; // next crossing is past the segment end
        t = t_max[axis];
        idx[axis] += step[axis];
        t_max[axis] += t_delta[axis];
    }
}

} // namespace occugen
