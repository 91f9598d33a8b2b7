#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occugen/grid.hpp"
#include "occugen/io.hpp"
#include "occugen/rng.hpp"
#include "occugen/voxel.hpp"

namespace occugen {

/// Cell material. Glass blocks traversal but returns no lidar hit.
enum class Material : uint8_t { kFree = 0, kSolid = 1, kGlass = 2 };

/// Dense ground-truth environment on the global lattice, anchored at the
/// world origin (cell (0,0,0) spans [0,res)^3).
class GroundTruthWorld {
public:
    GroundTruthWorld() = default;

    GroundTruthWorld(int nx, int ny, int nz, double resolution)
        : nx_(nx), ny_(ny), nz_(nz), resolution_(resolution),
          cells_(static_cast<size_t>(nx) * ny * nz, static_cast<uint8_t>(Material::kFree)) {
        if (nx <= 0 || ny <= 0 || nz <= 0) throw std::invalid_argument("world dims must be positive");
        if (resolution <= 0.0) throw std::invalid_argument("world resolution must be positive");
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    double resolution() const { return resolution_; }

    bool in_bounds(const VoxelKey& k) const {
        return k.i >= 0 && k.j >= 0 && k.k >= 0 && k.i < nx_ && k.j < ny_ && k.k < nz_;
    }

    bool in_bounds(const Vec3& p) const { return in_bounds(world_to_key(p, resolution_)); }

    Material material(const VoxelKey& k) const {
        return static_cast<Material>(cells_[index(k)]);
    }

    void set_material(const VoxelKey& k, Material m) { cells_[index(k)] = static_cast<uint8_t>(m); }

    /// Fills an axis-aligned box given in meters, clipped to bounds.
    void fill_box(const Vec3& lo, const Vec3& hi, Material m) {
        const int i0 = std::max(0, static_cast<int>(std::floor(lo.x / resolution_ + 1e-9)));
        const int j0 = std::max(0, static_cast<int>(std::floor(lo.y / resolution_ + 1e-9)));
        const int k0 = std::max(0, static_cast<int>(std::floor(lo.z / resolution_ + 1e-9)));
        const int i1 = std::min(nx_, static_cast<int>(std::ceil(hi.x / resolution_ - 1e-9)));
        const int j1 = std::min(ny_, static_cast<int>(std::ceil(hi.y / resolution_ - 1e-9)));
        const int k1 = std::min(nz_, static_cast<int>(std::ceil(hi.z / resolution_ - 1e-9)));
        for (int k = k0; k < k1; ++k)
            for (int j = j0; j < j1; ++j)
                for (int i = i0; i < i1; ++i) set_material({i, j, k}, m);
    }

    /// Ground-truth occupancy for training targets and evaluation windows:
    /// 1 for solid, 0 otherwise. Glass never returns lidar energy, so a fully
    /// observed map would not contain it either. Out-of-bounds counts as
    /// solid (worlds are closed boxes).
    float occupancy_value(const VoxelKey& k) const {
        if (!in_bounds(k)) return 1.0f;
        return material(k) == Material::kSolid ? 1.0f : 0.0f;
    }

    bool traversable(const VoxelKey& k) const {
        return in_bounds(k) && material(k) == Material::kFree;
    }

    const std::vector<uint8_t>& raw_cells() const { return cells_; }
    std::vector<uint8_t>& raw_cells() { return cells_; }

private:
    size_t index(const VoxelKey& k) const {
        return (static_cast<size_t>(k.k) * ny_ + k.j) * nx_ + k.i;
    }

    int nx_ = 0, ny_ = 0, nz_ = 0;
    double resolution_ = 0.0;
    std::vector<uint8_t> cells_;
};

/// Cuts a complete (fully known) local occupancy grid from ground truth at a
/// pose, with nearest-voxel resampling in the pose's yaw-rotated frame.
/// Occupied = 1, everything else = 0.
inline LocalGrid world_submap(const GroundTruthWorld& world, const Pose& center, int dx, int dy,
                              int dz, double resolution) {
    LocalGrid grid(dx, dy, dz, resolution, center, 0.0f);
    for (int iz = 0; iz < dz; ++iz)
        for (int iy = 0; iy < dy; ++iy)
            for (int ix = 0; ix < dx; ++ix) {
                const Vec3 p = grid.voxel_center_world(ix, iy, iz);
                grid.at(ix, iy, iz) = world.occupancy_value(world_to_key(p, resolution));
            }
    return grid;
}

enum class Scenario {
    kCorridorCorner,
    kSquareLoop,
    kStartupRoom,
    kGlassRailing,
    kRandomRooms,
};

inline const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::kCorridorCorner: return "corridor_corner";
        case Scenario::kSquareLoop: return "square_loop";
        case Scenario::kStartupRoom: return "startup_room";
        case Scenario::kGlassRailing: return "glass_railing";
        case Scenario::kRandomRooms: return "random_rooms";
    }
    return "?";
}

inline Scenario scenario_from_string(const std::string& name) {
    if (name == "corridor_corner") return Scenario::kCorridorCorner;
    if (name == "square_loop") return Scenario::kSquareLoop;
    if (name == "startup_room") return Scenario::kStartupRoom;
    if (name == "glass_railing") return Scenario::kGlassRailing;
    if (name == "random_rooms") return Scenario::kRandomRooms;
    throw std::invalid_argument("unknown scenario: " + name);
}

/// A generated environment plus everything a run needs: start poses (robot
/// foot positions), the exploration target set, and scenario hazards.
struct ScenarioWorld {
    GroundTruthWorld world;
    std::vector<Pose> start_poses;
    VoxelKeySet target; // observable voxels counted for coverage
    VoxelKeySet drop_zone_columns; // glass_railing: xy columns (k=0) a path must never cross
};

namespace detail {

/// Observable voxels: free cells plus solid cells with a free 6-neighbor.
/// Glass is invisible to the sensor and never part of the target.
inline VoxelKeySet observable_target(const GroundTruthWorld& w) {
    VoxelKeySet target;
    static const int nbr[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int k = 0; k < w.nz(); ++k)
        for (int j = 0; j < w.ny(); ++j)
            for (int i = 0; i < w.nx(); ++i) {
                const VoxelKey key{i, j, k};
                const Material m = w.material(key);
                if (m == Material::kFree) {
                    target.insert(key);
                } else if (m == Material::kSolid) {
                    for (const auto& d : nbr) {
                        const VoxelKey n{i + d[0], j + d[1], k + d[2]};
                        if (w.in_bounds(n) && w.material(n) == Material::kFree) {
                            target.insert(key);
                            break;
                        }
                    }
                }
            }
    return target;
}

/// Hollow room shell: solid floor slab, ceiling and outer walls, free inside.
inline GroundTruthWorld shell_room(double size_x, double size_y, double height, double res,
                                   double floor_top = -1.0) {
    const int nx = static_cast<int>(std::lround(size_x / res));
    const int ny = static_cast<int>(std::lround(size_y / res));
    const int nz = static_cast<int>(std::lround(height / res));
    GroundTruthWorld w(nx, ny, nz, res);
    const double wall = res; // one-cell shell
    if (floor_top < 0.0) floor_top = res;
    w.fill_box({0, 0, 0}, {size_x, size_y, floor_top}, Material::kSolid);         // floor
    w.fill_box({0, 0, height - wall}, {size_x, size_y, height}, Material::kSolid); // ceiling
    w.fill_box({0, 0, 0}, {wall, size_y, height}, Material::kSolid);
    w.fill_box({size_x - wall, 0, 0}, {size_x, size_y, height}, Material::kSolid);
    w.fill_box({0, 0, 0}, {size_x, wall, height}, Material::kSolid);
    w.fill_box({0, size_y - wall, 0}, {size_x, size_y, height}, Material::kSolid);
    return w;
}

} // namespace detail

/// Builds the named scenario. Deterministic per (scenario, seed, resolution).
/// Poses in start_poses are robot foot positions resting on the local floor.
inline ScenarioWorld make_world(Scenario scenario, uint64_t seed, double resolution = 0.2) {
    const double res = resolution;
    const double height = 3.2;
    ScenarioWorld out;

    switch (scenario) {
        case Scenario::kCorridorCorner: {
            // L-shape: two legs 2.4 m wide meeting in a corner.
            const double sx = 11.2, sy = 11.2;
            GroundTruthWorld w = detail::shell_room(sx, sy, height, res);
            // Carve everything above the floor solid again, then open the two legs.
            w.fill_box({res, res, res}, {sx - res, sy - res, height - res}, Material::kSolid);
            w.fill_box({0.8, 0.8, res}, {10.4, 3.2, height - res}, Material::kFree);  // leg A along x
            w.fill_box({8.0, 0.8, res}, {10.4, 10.4, height - res}, Material::kFree); // leg B along y
            out.world = std::move(w);
            out.start_poses = {{1.6, 2.0, res, 0.0},  {2.4, 1.6, res, 0.0}, {1.6, 1.6, res, 0.3},
                               {3.2, 2.0, res, 0.0},  {2.0, 2.4, res, -0.3}, {2.8, 1.6, res, 0.2},
                               {1.6, 2.4, res, 0.0},  {3.6, 2.0, res, 0.1}};
            break;
        }
        case Scenario::kSquareLoop: {
            // Ring corridor: 4 hallways, 4 turns.
            const double sx = 12.8, sy = 12.8;
            GroundTruthWorld w = detail::shell_room(sx, sy, height, res);
            w.fill_box({3.2, 3.2, res}, {9.6, 9.6, height - res}, Material::kSolid); // center block
            out.world = std::move(w);
            out.start_poses = {{1.6, 1.6, res, 0.0}, {11.2, 1.6, res, 1.5708},
                               {11.2, 11.2, res, 3.1416}, {1.6, 11.2, res, -1.5708},
                               {6.4, 1.6, res, 0.0}, {1.6, 6.4, res, 1.5708},
                               {11.2, 6.4, res, -1.5708}, {6.4, 11.2, res, 3.1416}};
            break;
        }
        case Scenario::kStartupRoom: {
            // Open room; the blind cone guarantees an unobserved floor disk
            // under the start pose.
            const double sx = 9.6, sy = 9.6;
            out.world = detail::shell_room(sx, sy, height, res);
            out.start_poses = {{4.8, 4.8, res, 0.0}, {4.0, 4.8, res, 0.5}, {4.8, 4.0, res, 1.0},
                               {5.6, 4.8, res, 2.0}, {4.8, 5.6, res, -0.5}, {4.0, 4.0, res, 0.0},
                               {5.6, 5.6, res, 0.7}, {4.4, 5.2, res, 0.0}};
            break;
        }
        case Scenario::kGlassRailing: {
            // Elevated walkway along x bordered by a glass railing; beyond it
            // the floor drops away. The drop-zone floor sits far below the
            // walkway, so no ground support exists past the railing.
            const double sx = 12.8, sy = 8.0;
            const double walkway_top = 3 * res;            // walkway foot height
            const double rail_y0 = 4.0, rail_y1 = 4.0 + res;
            GroundTruthWorld w = detail::shell_room(sx, sy, height, res, res);
            // Podium under the walkway.
            w.fill_box({res, res, 0}, {sx - res, rail_y0, walkway_top}, Material::kSolid);
            // Glass railing above the walkway edge.
            w.fill_box({res, rail_y0, walkway_top}, {sx - res, rail_y1, walkway_top + 1.2},
                       Material::kGlass);
            out.world = std::move(w);
            const double fz = walkway_top;
            out.start_poses = {{1.6, 2.0, fz, 0.0}, {2.4, 2.4, fz, 0.0}, {1.6, 2.8, fz, 0.3},
                               {3.2, 2.0, fz, 0.0}, {2.0, 1.6, fz, -0.3}, {4.0, 2.4, fz, 0.0},
                               {2.8, 2.8, fz, 0.2}, {1.6, 1.6, fz, 0.0}, {3.6, 2.0, fz, 0.1},
                               {2.4, 1.6, fz, 0.0}};
            // Columns past the railing (open drop) a safe path must avoid.
            const int j0 = static_cast<int>(std::lround(rail_y1 / res));
            const int j1 = static_cast<int>(std::lround((sy - res) / res));
            for (int j = j0; j < j1; ++j)
                for (int i = 1; i < out.world.nx() - 1; ++i)
                    out.drop_zone_columns.insert(VoxelKey{i, j, 0});
            break;
        }
        case Scenario::kRandomRooms: {
            // Training corpus rooms: varied floor heights, random interior
            // obstacles and a partition wall with a doorway.
            Rng rng(Rng::derive(seed, 0x524f4f4dull));
            const double sx = 6.4 + 0.8 * rng.uniform_int(0, 6);
            const double sy = 6.4 + 0.8 * rng.uniform_int(0, 6);
            const int floor_cells = rng.uniform_int(1, 3);
            const double floor_top = floor_cells * res;
            GroundTruthWorld w = detail::shell_room(sx, sy, height, res, floor_top);

            const int n_obstacles = rng.uniform_int(2, 5);
            for (int n = 0; n < n_obstacles; ++n) {
                const double bw = rng.uniform(0.4, 1.6);
                const double bd = rng.uniform(0.4, 1.6);
                const double bh = rng.uniform(0.4, 2.0);
                const double bx = rng.uniform(0.8, sx - 0.8 - bw);
                const double by = rng.uniform(0.8, sy - 0.8 - bd);
                w.fill_box({bx, by, floor_top}, {bx + bw, by + bd, floor_top + bh}, Material::kSolid);
            }
            if (rng.uniform(0.0, 1.0) < 0.6) {
                // Partition with a doorway.
                const double wx = rng.uniform(2.4, sx - 2.4);
                const double door_y = rng.uniform(1.2, sy - 2.4);
                w.fill_box({wx, res, floor_top}, {wx + res, sy - res, height - res}, Material::kSolid);
                w.fill_box({wx, door_y, floor_top}, {wx + res, door_y + 1.2, height - res},
                           Material::kFree);
            }
            out.world = std::move(w);
            // A handful of free start poses for corpus pose sampling.
            for (int n = 0; n < 64; ++n) {
                const double px = rng.uniform(0.8, sx - 0.8);
                const double py = rng.uniform(0.8, sy - 0.8);
                const VoxelKey cell = world_to_key({px, py, floor_top + 0.5 * res}, res);
                if (out.world.traversable(cell))
                    out.start_poses.push_back({px, py, floor_top, rng.uniform(0.0, 6.2831853)});
                if (out.start_poses.size() >= 24) break;
            }
            break;
        }
    }

    out.target = detail::observable_target(out.world);
    return out;
}

// ---------------------------------------------------------------------------
// OCCW1: dense world snapshot. Same header layout as OCCV1 (origin fields
// hold the AABB min corner, yaw 0) followed by one material byte per cell in
// x-fastest order.
// ---------------------------------------------------------------------------

inline void save_world(const GroundTruthWorld& w, const std::filesystem::path& path) {
    detail::atomic_write(path, [&](std::ofstream& out) {
        out << "OCCW1 " << w.nx() << ' ' << w.ny() << ' ' << w.nz() << ' '
            << detail::format_double(w.resolution()) << " 0 0 0 0\n";
        out.write(reinterpret_cast<const char*>(w.raw_cells().data()),
                  static_cast<std::streamsize>(w.raw_cells().size()));
    });
}

inline GroundTruthWorld load_world(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(IoErrorKind::kOpenFailed, "cannot open: " + path.string());
    std::string header;
    if (!std::getline(in, header)) throw io_error(IoErrorKind::kBadHeader, "missing header line");
    std::istringstream hs(header);
    std::string magic;
    int nx = 0, ny = 0, nz = 0;
    double res = 0.0, ox, oy, oz, yaw;
    hs >> magic;
    detail::check_magic(magic, "OCCW1", "OCCW");
    if (!(hs >> nx >> ny >> nz >> res >> ox >> oy >> oz >> yaw) || nx <= 0 || ny <= 0 || nz <= 0 ||
        res <= 0.0)
        throw io_error(IoErrorKind::kBadHeader, "malformed OCCW1 header: " + header);
    GroundTruthWorld w(nx, ny, nz, res);
    in.read(reinterpret_cast<char*>(w.raw_cells().data()),
            static_cast<std::streamsize>(w.raw_cells().size()));
    if (static_cast<size_t>(in.gcount()) != w.raw_cells().size())
        throw io_error(IoErrorKind::kTruncated, "truncated OCCW1 payload: " + path.string());
    return w;
}

} // namespace occugen
