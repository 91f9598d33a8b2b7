#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "occugen/fusion.hpp"
#include "occugen/global_map.hpp"
#include "occugen/grid.hpp"
#include "occugen/io.hpp"
#include "occugen/lidar.hpp"
#include "test_util.hpp"

using namespace occugen;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "occugen_grid_tests";
    fs::create_directories(dir);
    return dir / name;
}

LocalGrid random_grid(int dx, int dy, int dz, uint64_t seed) {
    Rng rng(seed);
    LocalGrid g(dx, dy, dz, 0.25, Pose{1.5, -2.0, 0.75, 0.3});
    for (float& v : g.values()) v = static_cast<float>(rng.uniform(0.0, 1.0));
    return g;
}

} // namespace

TEST_CASE("grid round trip is bit exact") {
    const LocalGrid g = random_grid(9, 7, 5, 11);
    const fs::path path = temp_file("roundtrip.occv");
    save_grid(g, path);
    const LocalGrid back = load_grid(path);
    REQUIRE(back == g);
}

TEST_CASE("grid file size is header plus payload") {
    const LocalGrid g(32, 32, 16, 0.2, Pose{});
    const fs::path path = temp_file("size.occv");
    save_grid(g, path);

    std::ifstream in(path, std::ios::binary);
    std::string header;
    std::getline(in, header);
    const size_t expected = header.size() + 1 + 32 * 32 * 16 * 4;
    REQUIRE(fs::file_size(path) == expected);
}

TEST_CASE("grid load errors are distinct") {
    const fs::path good = temp_file("good.occv");
    save_grid(random_grid(4, 4, 4, 1), good);

    SECTION("wrong magic") {
        const fs::path path = temp_file("magic.occv");
        std::ofstream(path) << "NOPE 4 4 4 0.2 0 0 0 0\n";
        try {
            load_grid(path);
            FAIL("expected io_error");
        } catch (const io_error& e) {
            REQUIRE(e.kind() == IoErrorKind::kBadMagic);
        }
    }
    SECTION("version mismatch") {
        const fs::path path = temp_file("version.occv");
        std::ofstream(path) << "OCCV2 4 4 4 0.2 0 0 0 0\n";
        try {
            load_grid(path);
            FAIL("expected io_error");
        } catch (const io_error& e) {
            REQUIRE(e.kind() == IoErrorKind::kBadVersion);
        }
    }
    SECTION("truncated payload") {
        const fs::path path = temp_file("trunc.occv");
        fs::copy_file(good, path, fs::copy_options::overwrite_existing);
        fs::resize_file(path, fs::file_size(path) - 17);
        try {
            load_grid(path);
            FAIL("expected io_error");
        } catch (const io_error& e) {
            REQUIRE(e.kind() == IoErrorKind::kTruncated);
        }
    }
}

TEST_CASE("global map round trip preserves cells and metadata") {
    GlobalOccupancyMap map(0.4, logit(0.1), logit(0.95), 0.5);
    Rng rng(3);
    for (int n = 0; n < 200; ++n) {
        const VoxelKey key{rng.uniform_int(-40, 40), rng.uniform_int(-40, 40), rng.uniform_int(-8, 8)};
        map.apply_update(key, rng.uniform(-1.5, 1.5),
                         rng.uniform(0.0, 1.0) < 0.5 ? kProvenanceSensed : kProvenancePredicted);
    }
    const fs::path path = temp_file("map.occm");
    save_global_map(map, path);
    REQUIRE(load_global_map(path) == map);
}

TEST_CASE("binarize thresholds") {
    LocalGrid half(3, 2, 1, 0.2, Pose{});
    REQUIRE(binarize(half, 0.5).size() == half.size()); // all cells are 0.5

    LocalGrid zeros(3, 2, 1, 0.2, Pose{}, 0.0f);
    REQUIRE(binarize(zeros, 0.3).empty());

    LocalGrid mix(3, 1, 1, 0.2, Pose{});
    mix.at(0, 0, 0) = 0.2f;
    mix.at(1, 0, 0) = 0.6f;
    mix.at(2, 0, 0) = 0.9f;
    const VoxelKeySet keys = binarize(mix, 0.5);
    REQUIRE(keys.size() == 2);
    REQUIRE(keys.count(VoxelKey{1, 0, 0}) == 1);
    REQUIRE(keys.count(VoxelKey{2, 0, 0}) == 1);

    REQUIRE_THROWS_AS(binarize(mix, 0.0), std::invalid_argument);
}

TEST_CASE("extract_submap of an empty map is all unknown") {
    const GlobalOccupancyMap map(0.2);
    const MaskedSubmap sub = extract_submap(map, Pose{3.0, -1.0, 0.5, 0.7}, 8, 8, 4, 0.2);
    sub.validate();
    REQUIRE(sub.observed_count() == 0);
    for (float v : sub.grid.values()) REQUIRE(v == 0.5f);
    REQUIRE(sub.unknown_fraction() == 1.0);
}

TEST_CASE("extract_submap marks a single occupied cell at the window center") {
    GlobalOccupancyMap map(0.2);
    const Pose center{1.0, 1.0, 1.0, 0.0};
    const VoxelKey key = world_to_key({1.0 + 0.1, 1.0 + 0.1, 1.0 + 0.1}, 0.2);
    map.apply_update(key, 2.0, kProvenanceSensed);

    const MaskedSubmap sub = extract_submap(map, center, 8, 8, 4, 0.2);
    int occupied = 0;
    for (int iz = 0; iz < 4; ++iz)
        for (int iy = 0; iy < 8; ++iy)
            for (int ix = 0; ix < 8; ++ix)
                if (sub.occupied_mask[sub.grid.index(ix, iy, iz)]) {
                    ++occupied;
                    REQUIRE(world_to_key(sub.grid.voxel_center_world(ix, iy, iz), 0.2) == key);
                    REQUIRE(sub.grid.at(ix, iy, iz) == 1.0f);
                }
    REQUIRE(occupied == 1);
    REQUIRE_THROWS_AS(extract_submap(map, center, 8, 8, 4, 0.1), std::invalid_argument);
}

TEST_CASE("extract_submap matches an independent ray replay in a corridor") {
    // 4 m corridor along x.
    const double res = 0.2;
    GroundTruthWorld world(30, 12, 10, res);
    world.fill_box({0, 0, 0}, {6.0, 2.4, res}, Material::kSolid);         // floor
    world.fill_box({0, 0, 0}, {6.0, res, 2.0}, Material::kSolid);         // wall y=0
    world.fill_box({0, 2.4 - res, 0}, {6.0, 2.4, 2.0}, Material::kSolid); // wall y=max
    world.fill_box({6.0 - res, 0, 0}, {6.0, 2.4, 2.0}, Material::kSolid); // end wall

    const Pose robot{1.0, 1.2, res, 0.0};
    LidarConfig lidar;
    lidar.max_range = 5.0;
    const Scan scan = simulate_scan(world, robot, lidar);

    GlobalOccupancyMap map(res);
    insert_scan(map, scan, FusionParams{});

    const Pose center{robot.x, robot.y, 1.0, 0.0};
    const MaskedSubmap sub = extract_submap(map, center, 16, 16, 8, res);
    sub.validate();

    // Independent replay: which window voxels did the scan touch, and how.
    VoxelKeySet hit_set(scan.hit_cells.begin(), scan.hit_cells.end());
    size_t expect_occ = 0, expect_free = 0, expect_unknown = 0;
    for (int iz = 0; iz < 8; ++iz)
        for (int iy = 0; iy < 16; ++iy)
            for (int ix = 0; ix < 16; ++ix) {
                const VoxelKey key = world_to_key(sub.grid.voxel_center_world(ix, iy, iz), res);
                const size_t idx = sub.grid.index(ix, iy, iz);
                if (hit_set.count(key)) {
                    ++expect_occ;
                    REQUIRE(sub.occupied_mask[idx] == 1);
                } else if (scan.free_cells.count(key)) {
                    ++expect_free;
                    REQUIRE(sub.unoccupied_mask[idx] == 1);
                } else {
                    ++expect_unknown;
                    REQUIRE(sub.observed(idx) == false);
                }
            }
    size_t got_occ = 0, got_free = 0;
    for (size_t i = 0; i < sub.grid.size(); ++i) {
        got_occ += sub.occupied_mask[i];
        got_free += sub.unoccupied_mask[i];
    }
    REQUIRE(got_occ == expect_occ);
    REQUIRE(got_free == expect_free);
    REQUIRE(sub.grid.size() - sub.observed_count() == expect_unknown);
    REQUIRE(sub.unknown_fraction() ==
            Catch::Approx(double(expect_unknown) / double(sub.grid.size())).margin(1e-12));
}

TEST_CASE("submap masks never overlap on random maps") {
    Rng rng(99);
    GlobalOccupancyMap map(0.2);
    for (int n = 0; n < 4000; ++n)
        map.apply_update({rng.uniform_int(-20, 20), rng.uniform_int(-20, 20), rng.uniform_int(-5, 5)},
                         rng.uniform(-2.0, 2.0), kProvenanceSensed);
    for (int trial = 0; trial < 10; ++trial) {
        const Pose center{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-1, 1),
                          rng.uniform(0, 6.28)};
        const MaskedSubmap sub = extract_submap(map, center, 12, 12, 6, 0.2);
        REQUIRE_NOTHROW(sub.validate());
    }
}

TEST_CASE("grid spec window placement keeps floor layers under the foot") {
    GridSpec spec{16, 16, 8, 0.4, 2};
    const Pose foot{2.0, 3.0, 0.4, 0.0};
    const Pose center = spec.window_center(foot);
    const double bottom = center.z - 0.5 * 8 * 0.4;
    REQUIRE(foot.z - bottom == Catch::Approx(2 * 0.4));
}
