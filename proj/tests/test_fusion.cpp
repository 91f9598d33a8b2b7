#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "occugen/fusion.hpp"

using namespace occugen;

namespace {

Scan hit_scan(const VoxelKey& key, double res = 0.4) {
    Scan s;
    s.resolution = res;
    s.hit_cells.push_back(key);
    s.hit_points.push_back(key_center(key, res));
    return s;
}

Scan miss_scan(const VoxelKey& key, double res = 0.4) {
    Scan s;
    s.resolution = res;
    s.free_cells.insert(key);
    return s;
}

/// Brute-force sequential Bayes over a measurement list, in probability
/// space. The independent oracle for every fusion test.
double bayes_chain(double prior, const std::vector<double>& likelihoods) {
    double p = prior;
    for (double l : likelihoods) {
        const double odds = (l / (1.0 - l)) * (p / (1.0 - p)) / (prior / (1.0 - prior));
        p = odds / (1.0 + odds);
    }
    return p;
}

GlobalOccupancyMap wide_map(double res = 0.4) {
    return GlobalOccupancyMap(res, logit(1e-6), logit(1.0 - 1e-6), 0.5);
}

} // namespace

TEST_CASE("probability one half carries no evidence") {
    REQUIRE(logit(0.5) == 0.0);
    GlobalOccupancyMap map(0.4);
    map.apply_update({0, 0, 0}, 0.7, kProvenanceSensed);
    const double before = map.find({0, 0, 0})->log_odds;
    map.apply_update({0, 0, 0}, logit(0.5) - logit(map.prior()), kProvenanceSensed);
    REQUIRE(map.find({0, 0, 0})->log_odds == before);
}

TEST_CASE("two sensor hits match the sequential Bayes oracle") {
    GlobalOccupancyMap map = wide_map();
    FusionParams params; // p_hit_sensor = 0.7
    const VoxelKey key{3, 4, 1};
    insert_scan(map, hit_scan(key), params);
    insert_scan(map, hit_scan(key), params);

    const double oracle = bayes_chain(0.5, {0.7, 0.7});
    REQUIRE(oracle == Catch::Approx(0.8448).margin(5e-4)); // frozen from the oracle
    REQUIRE(logistic(map.find(key)->log_odds) == Catch::Approx(oracle).margin(1e-12));
    REQUIRE(map.is_observed(key));
}

TEST_CASE("hit then miss equals one-shot Bayes and is order independent") {
    FusionParams params;
    const VoxelKey key{1, 2, 3};

    GlobalOccupancyMap ab = wide_map();
    insert_scan(ab, hit_scan(key), params);
    insert_scan(ab, miss_scan(key), params);

    GlobalOccupancyMap ba = wide_map();
    insert_scan(ba, miss_scan(key), params);
    insert_scan(ba, hit_scan(key), params);

    const double oracle = bayes_chain(0.5, {0.7, 0.4});
    REQUIRE(ab.find(key)->log_odds == Catch::Approx(ba.find(key)->log_odds).margin(1e-12));
    REQUIRE(logistic(ab.find(key)->log_odds) == Catch::Approx(oracle).margin(1e-12));
}

TEST_CASE("a hit beats a pass-through within one scan") {
    GlobalOccupancyMap map = wide_map();
    FusionParams params;
    const VoxelKey key{5, 5, 0};
    Scan s = hit_scan(key);
    s.free_cells.insert(key); // some other ray passed through the same cell
    insert_scan(map, s, params);
    REQUIRE(logistic(map.find(key)->log_odds) == Catch::Approx(0.7).margin(1e-12));
}

TEST_CASE("scan resolution mismatch is rejected") {
    GlobalOccupancyMap map(0.4);
    REQUIRE_THROWS_AS(insert_scan(map, hit_scan({0, 0, 0}, 0.2), FusionParams{}),
                      std::invalid_argument);
}

namespace {

MaskedSubmap window_at_origin(int d, double res) {
    MaskedSubmap m;
    m.grid = LocalGrid(d, d, d, res, Pose{d * res / 2, d * res / 2, d * res / 2, 0.0}, 0.5f);
    m.occupied_mask.assign(m.grid.size(), 0);
    m.unoccupied_mask.assign(m.grid.size(), 0);
    return m;
}

} // namespace

TEST_CASE("fusing over a fully observed window changes nothing") {
    const double res = 0.4;
    GlobalOccupancyMap map = wide_map(res);
    FusionParams params;

    MaskedSubmap mask = window_at_origin(4, res);
    // observe every voxel in the window with the sensor
    Scan s;
    s.resolution = res;
    for (int iz = 0; iz < 4; ++iz)
        for (int iy = 0; iy < 4; ++iy)
            for (int ix = 0; ix < 4; ++ix)
                s.free_cells.insert(world_to_key(mask.grid.voxel_center_world(ix, iy, iz), res));
    insert_scan(map, s, params);

    LocalGrid prediction = mask.grid;
    for (float& v : prediction.values()) v = 1.0f; // predict everything occupied

    const GlobalOccupancyMap before = map;
    fuse_prediction(map, prediction, mask, params);
    REQUIRE(map == before);
}

TEST_CASE("one predicted-occupied vote lands at p_hit_diff") {
    const double res = 0.4;
    GlobalOccupancyMap map = wide_map(res);
    FusionParams params; // p_hit_diff = 0.6

    MaskedSubmap mask = window_at_origin(2, res);
    LocalGrid prediction = mask.grid;
    for (float& v : prediction.values()) v = 0.0f;
    prediction.at(1, 1, 1) = 0.9f;

    fuse_prediction(map, prediction, mask, params);
    const VoxelKey key = world_to_key(prediction.voxel_center_world(1, 1, 1), res);
    REQUIRE(logistic(map.find(key)->log_odds) == Catch::Approx(0.6).margin(1e-12));
    REQUIRE_FALSE(map.is_observed(key)); // prediction never joins O
    REQUIRE((map.find(key)->provenance & kProvenancePredicted) != 0);
}

TEST_CASE("four of five occupied votes match the voting oracle") {
    const double res = 0.4;
    GlobalOccupancyMap map = wide_map(res);
    FusionParams params; // p_hit_diff = 0.6, p_miss_diff = 0.45

    MaskedSubmap mask = window_at_origin(2, res);
    LocalGrid occ = mask.grid, fre = mask.grid;
    for (float& v : occ.values()) v = 1.0f;
    for (float& v : fre.values()) v = 0.0f;

    for (int vote = 0; vote < 4; ++vote) fuse_prediction(map, occ, mask, params);
    fuse_prediction(map, fre, mask, params);

    const VoxelKey key = world_to_key(occ.voxel_center_world(0, 0, 0), res);
    const double oracle = bayes_chain(0.5, {0.6, 0.6, 0.6, 0.6, 0.45});
    const double direct = logistic(4 * std::log(0.6 / 0.4) + std::log(0.45 / 0.55));
    REQUIRE(oracle == Catch::Approx(direct).margin(1e-12));
    REQUIRE(logistic(map.find(key)->log_odds) == Catch::Approx(oracle).margin(1e-12));
}

TEST_CASE("sensor precedence is exact") {
    const double res = 0.4;
    GlobalOccupancyMap map = wide_map(res);
    FusionParams params;

    MaskedSubmap mask = window_at_origin(4, res);
    const VoxelKey sensed = world_to_key(mask.grid.voxel_center_world(2, 2, 2), res);
    Scan s = hit_scan(sensed, res);
    insert_scan(map, s, params);
    const double before = map.find(sensed)->log_odds;

    LocalGrid prediction = mask.grid;
    for (float& v : prediction.values()) v = 1.0f;
    for (int round = 0; round < 7; ++round) fuse_prediction(map, prediction, mask, params);

    REQUIRE(map.find(sensed)->log_odds == before); // bitwise unchanged
}

TEST_CASE("misaligned prediction and mask are rejected") {
    const double res = 0.4;
    GlobalOccupancyMap map(res);
    MaskedSubmap mask = window_at_origin(4, res);
    LocalGrid other(4, 4, 4, res, Pose{99, 0, 0, 0});
    REQUIRE_THROWS_AS(fuse_prediction(map, other, mask, FusionParams{}), std::invalid_argument);
}

TEST_CASE("clear_predictions removes exactly the never-sensed prediction cells") {
    GlobalOccupancyMap map(0.4);
    map.apply_update({0, 0, 0}, 0.5, kProvenanceSensed);
    map.apply_update({1, 0, 0}, 0.5, kProvenancePredicted);
    map.apply_update({2, 0, 0}, 0.5, kProvenancePredicted);
    map.apply_update({2, 0, 0}, 0.5, kProvenanceSensed); // predicted then sensed

    GlobalOccupancyMap sensed_only(0.4);
    clear_predictions(map);
    REQUIRE(map.find({0, 0, 0}) != nullptr);
    REQUIRE(map.find({1, 0, 0}) == nullptr);
    REQUIRE(map.find({2, 0, 0}) != nullptr);

    SECTION("sensed-only map unchanged") {
        GlobalOccupancyMap m(0.4);
        m.apply_update({7, 7, 7}, 1.0, kProvenanceSensed);
        const GlobalOccupancyMap before = m;
        clear_predictions(m);
        REQUIRE(m == before);
    }
    SECTION("prediction-only map empties") {
        GlobalOccupancyMap m(0.4);
        for (int i = 0; i < 10; ++i) m.apply_update({i, 0, 0}, 0.4, kProvenancePredicted);
        clear_predictions(m);
        REQUIRE(m.size() == 0);
    }
}

TEST_CASE("coverage counts sensed target voxels only") {
    VoxelKeySet target;
    for (int i = 0; i < 10; ++i) target.insert({i, 0, 0});

    GlobalOccupancyMap map(0.4);
    REQUIRE(coverage(map, target) == 0.0);

    for (int i = 0; i < 5; ++i) map.apply_update({i, 0, 0}, 0.5, kProvenanceSensed);
    for (int i = 5; i < 10; ++i) map.apply_update({i, 0, 0}, 0.5, kProvenancePredicted);
    REQUIRE(coverage(map, target) == 0.5); // predicted cells do not count

    for (int i = 5; i < 10; ++i) map.apply_update({i, 0, 0}, 0.5, kProvenanceSensed);
    REQUIRE(coverage(map, target) == 1.0);

    REQUIRE_THROWS_AS(coverage(map, VoxelKeySet{}), std::invalid_argument);
}

TEST_CASE("piecewise multiplicative rule equals additive log-odds within 1e-9") {
    // The property form of the merging rule: both evaluations over random
    // parameter draws and random measurement sequences.
    Rng rng(1234);
    for (int trial = 0; trial < 2000; ++trial) {
        const double prior = rng.uniform(0.2, 0.8);
        const int n = rng.uniform_int(1, 20);
        double p_mult = prior;
        double log_odds = logit(prior);
        for (int i = 0; i < n; ++i) {
            const double l = rng.uniform(0.05, 0.95);
            // multiplicative piecewise form
            const double inv = 1.0 + (1.0 - l) / l * (1.0 - p_mult) / p_mult * prior / (1.0 - prior);
            p_mult = 1.0 / inv;
            // additive log-odds form
            log_odds += logit(l) - logit(prior);
        }
        REQUIRE(std::abs(p_mult - logistic(log_odds)) < 1e-9);
    }
}

TEST_CASE("update order does not matter below the clamps") {
    Rng rng(55);
    const VoxelKey key{0, 0, 0};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> deltas;
        for (int i = 0; i < 12; ++i) deltas.push_back(rng.uniform(-0.2, 0.2));

        GlobalOccupancyMap a = wide_map();
        for (double d : deltas) a.apply_update(key, d, kProvenanceSensed);

        std::shuffle(deltas.begin(), deltas.end(), rng.engine());
        GlobalOccupancyMap b = wide_map();
        for (double d : deltas) b.apply_update(key, d, kProvenanceSensed);

        REQUIRE(a.find(key)->log_odds == Catch::Approx(b.find(key)->log_odds).margin(1e-12));
    }
}

TEST_CASE("posterior rises strictly with occupied votes") {
    const double res = 0.4;
    FusionParams params;
    MaskedSubmap mask = window_at_origin(2, res);
    LocalGrid occ = mask.grid;
    for (float& v : occ.values()) v = 1.0f;
    const VoxelKey key = world_to_key(occ.voxel_center_world(0, 0, 0), res);

    double prev = 0.5;
    GlobalOccupancyMap map = wide_map(res);
    for (int votes = 1; votes <= 10; ++votes) {
        fuse_prediction(map, occ, mask, params);
        const double p = logistic(map.find(key)->log_odds);
        REQUIRE(p > prev);
        prev = p;
    }
}

TEST_CASE("fusion parameter validation") {
    FusionParams bad;
    bad.p_hit_diff = 0.8; // stronger than the sensor: forbidden
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
    FusionParams bad2;
    bad2.p_miss_sensor = 0.6;
    REQUIRE_THROWS_AS(bad2.validate(), std::invalid_argument);
    REQUIRE_NOTHROW(FusionParams{}.validate());
}
