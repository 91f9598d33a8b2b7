#include <catch2/catch_amalgamated.hpp>

#include <queue>
#include <set>

#include "occugen/lidar.hpp"
#include "occugen/world.hpp"
#include "test_util.hpp"

using namespace occugen;
using testutil::flat_world;
using testutil::sampled_cells;
using testutil::segment_intersects_cell;

TEST_CASE("raycast walks a corridor into a wall") {
    const double res = 0.5;
    GroundTruthWorld world(8, 4, 4, res);
    world.fill_box({3 * res, 0, 0}, {4 * res, 4 * res, 4 * res}, Material::kSolid); // wall column i=3

    const Vec3 origin{0.5 * res, 0.5 * res, 0.5 * res};
    const RaycastResult r = raycast(world, origin, {1, 0, 0}, 10.0);

    REQUIRE(r.hit.has_value());
    REQUIRE(r.hit->x == Catch::Approx(3 * res).margin(1e-12));
    REQUIRE(r.hit_cell == VoxelKey{3, 0, 0});
    REQUIRE(r.traversed == std::vector<VoxelKey>{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
}

TEST_CASE("raycast range of one voxel spans start and next cell") {
    const double res = 0.5;
    GroundTruthWorld world(8, 4, 4, res); // all free
    const Vec3 origin{0.5 * res, 0.5 * res, 0.5 * res};
    const RaycastResult r = raycast(world, origin, {1, 0, 0}, res);
    REQUIRE_FALSE(r.hit.has_value());
    REQUIRE(r.traversed == std::vector<VoxelKey>{{0, 0, 0}, {1, 0, 0}});
}

TEST_CASE("raycast passes through glass and hits the solid behind it") {
    const double res = 0.5;
    GroundTruthWorld world(8, 4, 4, res);
    world.set_material({2, 0, 0}, Material::kGlass);
    world.set_material({4, 0, 0}, Material::kSolid);

    const Vec3 origin{0.5 * res, 0.5 * res, 0.5 * res};
    const RaycastResult r = raycast(world, origin, {1, 0, 0}, 10.0);
    REQUIRE(r.hit_cell == VoxelKey{4, 0, 0});
    REQUIRE(std::find(r.traversed.begin(), r.traversed.end(), VoxelKey{2, 0, 0}) !=
            r.traversed.end());
}

TEST_CASE("raycast rejects bad inputs") {
    GroundTruthWorld world(4, 4, 4, 0.5);
    REQUIRE_THROWS_AS(raycast(world, {-1, 0.2, 0.2}, {1, 0, 0}, 5.0), std::invalid_argument);
    REQUIRE_THROWS_AS(raycast(world, {0.2, 0.2, 0.2}, {2, 0, 0}, 5.0), std::invalid_argument);
}

TEST_CASE("raycast traversal equals the set of intersected voxels") {
    // Dense-sampling oracle plus an exact slab-test check for every cell the
    // traversal reports.
    const double res = 0.3;
    GroundTruthWorld world(20, 20, 12, res); // all free
    Rng rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        const Vec3 origin{rng.uniform(1.0, 5.0), rng.uniform(1.0, 5.0), rng.uniform(0.4, 3.0)};
        Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
        if (dir.norm() < 1e-6) continue;
        dir = dir.normalized();
        const double range = rng.uniform(0.2, 3.5);
        const RaycastResult r = raycast(world, origin, dir, range);

        // end of the segment, clipped the same way traversal clips at bounds
        const Vec3 end = origin + dir * range;
        std::set<VoxelKey> traversed(r.traversed.begin(), r.traversed.end());
        REQUIRE(traversed.size() == r.traversed.size()); // no duplicates

        for (const VoxelKey& key : r.traversed)
            REQUIRE(segment_intersects_cell(origin, end, key, res));

        for (const VoxelKey& key : sampled_cells(origin, end, res, 10))
            if (world.in_bounds(key)) REQUIRE(traversed.count(key) == 1);
    }
}

TEST_CASE("scan in an empty world has no hits and traverses to range") {
    const double res = 0.4;
    GroundTruthWorld world(40, 40, 20, res); // no geometry at all
    LidarConfig lidar;
    const Pose pose{8.0, 8.0, 2.0, 0.0};
    const Scan scan = simulate_scan(world, pose, lidar);
    REQUIRE(scan.hit_points.empty());
    REQUIRE_FALSE(scan.free_cells.empty());
}

TEST_CASE("full blind cone suppresses every ray") {
    GroundTruthWorld world = flat_world(20, 20, 10, 0.4);
    LidarConfig lidar;
    lidar.blind_cone_half_angle = 1.5707963267948966; // pi/2
    const Scan scan = simulate_scan(world, Pose{4.0, 4.0, 0.4, 0.0}, lidar);
    REQUIRE(scan.hit_points.empty());
    REQUIRE(scan.free_cells.empty());
}

TEST_CASE("no emitted ray points inside the blind cone") {
    LidarConfig lidar;
    int count = 0;
    for_each_ray_direction(lidar, 0.3, [&](const Vec3& dir) {
        const double elev = std::asin(dir.z);
        REQUIRE(elev + 1.5707963267948966 >= lidar.blind_cone_half_angle - 1e-9);
        ++count;
    });
    REQUIRE(count > 0);
    REQUIRE(count % lidar.n_azimuth == 0);
}

TEST_CASE("corridor scan hits lie on walls and match a per-ray oracle") {
    const double res = 0.25;
    const double width = 2.0, length = 8.0, height = 2.5;
    GroundTruthWorld world(static_cast<int>(length / res), static_cast<int>(width / res),
                           static_cast<int>(height / res), res);
    world.fill_box({0, 0, 0}, {length, width, res}, Material::kSolid);
    world.fill_box({0, 0, 0}, {length, res, height}, Material::kSolid);
    world.fill_box({0, width - res, 0}, {length, width, height}, Material::kSolid);
    world.fill_box({0, 0, height - res}, {length, width, height}, Material::kSolid);
    world.fill_box({length - res, 0, 0}, {length, width, height}, Material::kSolid);

    const Pose pose{1.5, 1.0, res, 0.2};
    LidarConfig lidar;
    lidar.max_range = 6.0;
    const Scan scan = simulate_scan(world, pose, lidar);

    // Every hit sits on a solid-cell boundary: the hit cell is solid and the
    // point just before the hit is not.
    for (size_t h = 0; h < scan.hit_points.size(); ++h) {
        REQUIRE(world.material(scan.hit_cells[h]) == Material::kSolid);
        const Vec3 p = scan.hit_points[h];
        const Vec3 to_sensor = (scan.origin - p).normalized();
        const VoxelKey before = world_to_key(p + to_sensor * (res * 0.01), res);
        REQUIRE(world.material(before) != Material::kSolid);
    }

    // Per-ray oracle: exact slab intersection against every solid cell.
    const auto entry_t = [&](const Vec3& o, const Vec3& dir, const VoxelKey& key) {
        const double lo[3] = {key.i * res, key.j * res, key.k * res};
        const double hi[3] = {(key.i + 1) * res, (key.j + 1) * res, (key.k + 1) * res};
        const double p[3] = {o.x, o.y, o.z};
        const double d[3] = {dir.x, dir.y, dir.z};
        double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
        for (int ax = 0; ax < 3; ++ax) {
            if (std::abs(d[ax]) < 1e-15) {
                if (p[ax] < lo[ax] || p[ax] > hi[ax]) return std::numeric_limits<double>::infinity();
                continue;
            }
            double ta = (lo[ax] - p[ax]) / d[ax];
            double tb = (hi[ax] - p[ax]) / d[ax];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1) return std::numeric_limits<double>::infinity();
        }
        return t0;
    };
    size_t expected_hits = 0;
    for_each_ray_direction(lidar, pose.yaw, [&](const Vec3& dir) {
        double first_solid = std::numeric_limits<double>::infinity();
        for (int k = 0; k < world.nz(); ++k)
            for (int j = 0; j < world.ny(); ++j)
                for (int i = 0; i < world.nx(); ++i)
                    if (world.material({i, j, k}) == Material::kSolid)
                        first_solid = std::min(first_solid, entry_t(scan.origin, dir, {i, j, k}));
        if (first_solid < lidar.max_range - 1e-9) ++expected_hits;
    });
    REQUIRE(scan.hit_points.size() == expected_hits);
}

namespace {

/// Flood fill of free cells from a seed; returns reached count.
size_t flood_free(const GroundTruthWorld& w, const VoxelKey& seed) {
    std::set<VoxelKey> seen;
    std::queue<VoxelKey> frontier;
    if (w.material(seed) != Material::kFree) return 0;
    frontier.push(seed);
    seen.insert(seed);
    const int nbr[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    while (!frontier.empty()) {
        const VoxelKey cur = frontier.front();
        frontier.pop();
        for (const auto& d : nbr) {
            const VoxelKey next{cur.i + d[0], cur.j + d[1], cur.k + d[2]};
            if (!w.in_bounds(next) || seen.count(next)) continue;
            if (w.material(next) != Material::kFree) continue;
            seen.insert(next);
            frontier.push(next);
        }
    }
    return seen.size();
}

size_t count_free(const GroundTruthWorld& w) {
    size_t n = 0;
    for (int k = 0; k < w.nz(); ++k)
        for (int j = 0; j < w.ny(); ++j)
            for (int i = 0; i < w.nx(); ++i)
                if (w.material({i, j, k}) == Material::kFree) ++n;
    return n;
}

} // namespace

TEST_CASE("corridor_corner is one connected free region with wide legs") {
    const ScenarioWorld sw = make_world(Scenario::kCorridorCorner, 0, 0.4);
    const Pose start = sw.start_poses.front();
    const VoxelKey seed = world_to_key({start.x, start.y, start.z +  0.2}, 0.4);
    REQUIRE(flood_free(sw.world, seed) == count_free(sw.world));

    // both legs at least 1.5 m wide: probe a cross-section per leg
    int width_a = 0;
    for (int j = 0; j < sw.world.ny(); ++j)
        if (sw.world.material({world_to_key({5.0, 0, 0}, 0.4).i, j, seed.k}) == Material::kFree)
            ++width_a;
    REQUIRE(width_a * 0.4 >= 1.5);
    int width_b = 0;
    for (int i = 0; i < sw.world.nx(); ++i)
        if (sw.world.material({i, world_to_key({0, 8.0, 0}, 0.4).j, seed.k}) == Material::kFree)
            ++width_b;
    REQUIRE(width_b * 0.4 >= 1.5);
}

TEST_CASE("glass_railing drop zone has no floor at walkway level and a glass border") {
    const ScenarioWorld sw = make_world(Scenario::kGlassRailing, 0, 0.4);
    REQUIRE_FALSE(sw.drop_zone_columns.empty());

    const double walkway_foot = sw.start_poses.front().z;
    const int foot_k = static_cast<int>(std::lround(walkway_foot / 0.4));
    bool glass_seen = false;
    for (const VoxelKey& col : sw.drop_zone_columns) {
        // support layer right below walkway foot height is empty over the drop
        REQUIRE(sw.world.material({col.i, col.j, foot_k - 1}) == Material::kFree);
        // railing of glass sits between walkway and drop
        if (sw.world.material({col.i, col.j - 1, foot_k}) == Material::kGlass) glass_seen = true;
    }
    REQUIRE(glass_seen);

    // glass is lidar-transparent: a scan from the walkway returns no hit in
    // any glass cell
    LidarConfig lidar;
    const Scan scan = simulate_scan(sw.world, sw.start_poses.front(), lidar);
    for (const VoxelKey& cell : scan.hit_cells)
        REQUIRE(sw.world.material(cell) == Material::kSolid);
}

TEST_CASE("random_rooms worlds are deterministic per seed") {
    const ScenarioWorld a = make_world(Scenario::kRandomRooms, 7, 0.4);
    const ScenarioWorld b = make_world(Scenario::kRandomRooms, 7, 0.4);
    REQUIRE(a.world.raw_cells() == b.world.raw_cells());
    REQUIRE(a.start_poses.size() == b.start_poses.size());
    const ScenarioWorld c = make_world(Scenario::kRandomRooms, 8, 0.4);
    REQUIRE(a.world.raw_cells() != c.world.raw_cells());
}

TEST_CASE("world snapshot round trip") {
    const ScenarioWorld sw = make_world(Scenario::kRandomRooms, 3, 0.4);
    const auto path = std::filesystem::temp_directory_path() / "occugen_world.occw";
    save_world(sw.world, path);
    const GroundTruthWorld back = load_world(path);
    REQUIRE(back.raw_cells() == sw.world.raw_cells());
    REQUIRE(back.resolution() == sw.world.resolution());
}

TEST_CASE("unknown scenario name is rejected") {
    REQUIRE_THROWS_AS(scenario_from_string("bogus"), std::invalid_argument);
}
