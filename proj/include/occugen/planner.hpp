#pragma once

#include <limits>
#include <queue>
#include <vector>

#include "occugen/fusion.hpp"
#include "occugen/global_map.hpp"
#include "occugen/lidar.hpp"

namespace occugen {

struct PlannerParams {
    double gamma_s = 0.5; // path-length discount on the frontier itself
    double gamma_d = 0.2; // distance discount along the path
    double min_frontier_spacing = 1.5;  // d_m
    int max_frontier_nodes = 3;         // n_max
    int sample_count = 60;
    double connect_radius = 2.4;
    double fc_range = 7.0;   // max frontier distance from the robot
    double rc_radius = 3.3;  // robot-centric prediction radius (informational)
    double body_height = 0.8;
    double support_below_min = 0.1; // support band below foot: [-max, -min]
    double support_below_max = 0.4;
    int support_radius_cells = 1;   // foot-span neighborhood searched for support

    void validate() const {
        if (gamma_s <= 0.0 || gamma_d <= 0.0) throw std::invalid_argument("gamma weights must be positive");
        if (min_frontier_spacing <= 0.0) throw std::invalid_argument("frontier spacing must be positive");
        if (max_frontier_nodes < 1) throw std::invalid_argument("need at least one frontier node");
        if (sample_count < 1 || connect_radius <= 0.0 || fc_range <= 0.0)
            throw std::invalid_argument("sampling parameters must be positive");
        if (!(support_below_min < support_below_max))
            throw std::invalid_argument("support band must have positive extent");
    }
};

struct GraphVertex {
    Pose pose;
    double volumetric_gain = 0.0;
    double exploration_gain = 0.0;
    double path_length = std::numeric_limits<double>::infinity(); // from root
    int parent = -1;
};

struct GraphEdge {
    int a = 0, b = 0;
    double length = 0.0;
};

/// Sampled traversability graph rooted at the robot. Vertex 0 is the root;
/// unreachable samples are dropped during construction.
struct ExplorationGraph {
    std::vector<GraphVertex> vertices;
    std::vector<GraphEdge> edges;

    bool empty() const { return vertices.empty(); }

    /// Vertex indices from the root to v (inclusive) along shortest-path tree.
    std::vector<int> path_to(int v) const {
        std::vector<int> path;
        for (int cur = v; cur != -1; cur = vertices[cur].parent) path.push_back(cur);
        std::reverse(path.begin(), path.end());
        return path;
    }
};

namespace planner_detail {

inline bool cell_air(const GlobalOccupancyMap& map, const VoxelKey& key) {
    return map.is_free(key); // present with log-odds <= 0 (sensed or predicted free)
}

/// Body column free (known or predicted) and ground support (occupied or
/// predicted occupied) inside the band beneath the foot.
inline bool pose_traversable(const GlobalOccupancyMap& map, const Pose& foot,
                             const PlannerParams& params) {
    const double res = map.resolution();
    const int i = static_cast<int>(std::floor(foot.x / res));
    const int j = static_cast<int>(std::floor(foot.y / res));

    const int body_lo = static_cast<int>(std::floor((foot.z + 0.5 * res) / res));
    const int body_hi = static_cast<int>(std::floor((foot.z + params.body_height - 1e-9) / res));
    for (int k = body_lo; k <= body_hi; ++k)
        if (!cell_air(map, {i, j, k})) return false;

    const int sup_lo = static_cast<int>(std::floor((foot.z - params.support_below_max) / res));
    const int sup_hi = static_cast<int>(std::floor((foot.z - params.support_below_min - 1e-9) / res));
    const int r = params.support_radius_cells; // foot span, not a single column
    for (int k = sup_lo; k <= sup_hi; ++k)
        for (int dj = -r; dj <= r; ++dj)
            for (int di = -r; di <= r; ++di)
                if (map.is_occupied({i + di, j + dj, k})) return true;
    return false;
}

inline bool edge_traversable(const GlobalOccupancyMap& map, const Pose& a, const Pose& b,
                             const PlannerParams& params) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len = std::sqrt(dx * dx + dy * dy);
    const int steps = std::max(1, static_cast<int>(std::ceil(len / (0.5 * map.resolution()))));
    for (int s = 0; s <= steps; ++s) {
        const double f = double(s) / steps;
        const Pose p{a.x + f * dx, a.y + f * dy, a.z, 0.0};
        if (!pose_traversable(map, p, params)) return false;
    }
    return true;
}

} // namespace planner_detail

/// Count of distinct unknown voxels the sensor pattern would touch from a
/// pose, casting through the current map; occupied cells (sensed or
/// predicted) occlude, unknown cells do not.
inline int volumetric_gain(const GlobalOccupancyMap& map, const Pose& foot,
                           const LidarConfig& lidar) {
    const Vec3 origin{foot.x, foot.y, foot.z + lidar.mount_height};
    VoxelKeySet seen_unknown;
    for_each_ray_direction(lidar, foot.yaw, [&](const Vec3& dir) {
        const Vec3 end = origin + dir * lidar.max_range;
        traverse_segment(origin, end, map.resolution(), [&](const VoxelKey& key, double) {
            if (map.is_occupied(key)) return false;
            if (map.is_unknown(key)) seen_unknown.insert(key);
            return true;
        });
    });
    return static_cast<int>(seen_unknown.size());
}

/// Distance-discounted sum of volumetric gains along the root path:
/// exp(-gamma_s S) * sum_j VolumetricGain(v_j) exp(-gamma_d D(v_1, v_j)),
/// S being the shortest-path length from the root to the vertex.
inline double exploration_gain(const ExplorationGraph& graph, int vertex,
                               const PlannerParams& params) {
    const GraphVertex& v = graph.vertices.at(vertex);
    if (!std::isfinite(v.path_length)) throw std::invalid_argument("vertex unreachable from root");
    double sum = 0.0;
    for (int idx : graph.path_to(vertex))
        sum += graph.vertices[idx].volumetric_gain *
               std::exp(-params.gamma_d * graph.vertices[idx].path_length);
    return std::exp(-params.gamma_s * v.path_length) * sum;
}

/// Samples a local traversability graph around the robot, connects
/// collision-free ground-supported edges, runs Dijkstra from the root and
/// fills both gains. Returns an empty graph when the root pose itself is not
/// traversable (the startup failure signature).
inline ExplorationGraph build_graph(const GlobalOccupancyMap& map, const Pose& robot,
                                    const PlannerParams& params, const LidarConfig& lidar,
                                    Rng& rng) {
    params.validate();
    ExplorationGraph graph;
    if (!planner_detail::pose_traversable(map, robot, params)) return graph;

    graph.vertices.push_back({robot, 0.0, 0.0, 0.0, -1});
    for (int s = 0; s < params.sample_count; ++s) {
        Pose p;
        p.x = robot.x + rng.uniform(-params.fc_range, params.fc_range);
        p.y = robot.y + rng.uniform(-params.fc_range, params.fc_range);
        p.z = robot.z;
        p.yaw = 0.0;
        if (planner_detail::pose_traversable(map, p, params)) graph.vertices.push_back({p});
    }

    // Candidate edges within the connect radius.
    std::vector<std::vector<std::pair<int, double>>> adj(graph.vertices.size());
    for (size_t a = 0; a < graph.vertices.size(); ++a)
        for (size_t b = a + 1; b < graph.vertices.size(); ++b) {
            const Pose& pa = graph.vertices[a].pose;
            const Pose& pb = graph.vertices[b].pose;
            const double dx = pa.x - pb.x, dy = pa.y - pb.y;
            const double len = std::sqrt(dx * dx + dy * dy);
            if (len > params.connect_radius || len < 1e-9) continue;
            if (!planner_detail::edge_traversable(map, pa, pb, params)) continue;
            adj[a].push_back({static_cast<int>(b), len});
            adj[b].push_back({static_cast<int>(a), len});
            graph.edges.push_back({static_cast<int>(a), static_cast<int>(b), len});
        }

    // Dijkstra from the root, deterministic tie-breaking on vertex index.
    using QE = std::pair<double, int>;
    std::priority_queue<QE, std::vector<QE>, std::greater<QE>> pq;
    graph.vertices[0].path_length = 0.0;
    pq.push({0.0, 0});
    while (!pq.empty()) {
        const auto [dist, u] = pq.top();
        pq.pop();
        if (dist > graph.vertices[u].path_length) continue;
        for (const auto& [w, len] : adj[u]) {
            const double nd = dist + len;
            if (nd < graph.vertices[w].path_length - 1e-12) {
                graph.vertices[w].path_length = nd;
                graph.vertices[w].parent = u;
                pq.push({nd, w});
            }
        }
    }

    // Drop unreachable samples, rebuild indices.
    std::vector<int> remap(graph.vertices.size(), -1);
    ExplorationGraph pruned;
    for (size_t i = 0; i < graph.vertices.size(); ++i) {
        if (!std::isfinite(graph.vertices[i].path_length)) continue;
        remap[i] = static_cast<int>(pruned.vertices.size());
        pruned.vertices.push_back(graph.vertices[i]);
    }
    for (GraphVertex& v : pruned.vertices)
        if (v.parent != -1) v.parent = remap[v.parent];
    for (const GraphEdge& e : graph.edges)
        if (remap[e.a] != -1 && remap[e.b] != -1)
            pruned.edges.push_back({remap[e.a], remap[e.b], e.length});

    for (GraphVertex& v : pruned.vertices)
        v.volumetric_gain = volumetric_gain(map, v.pose, lidar);
    for (size_t i = 0; i < pruned.vertices.size(); ++i)
        pruned.vertices[i].exploration_gain =
            exploration_gain(pruned, static_cast<int>(i), params);
    return pruned;
}

/// Ranks vertices by exploration gain (ties to the lower index) and greedily
/// keeps those at least d_m apart and within FC range of the root.
inline std::vector<int> select_frontiers(const ExplorationGraph& graph,
                                         const PlannerParams& params) {
    std::vector<int> order(graph.vertices.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double ga = graph.vertices[a].exploration_gain;
        const double gb = graph.vertices[b].exploration_gain;
        if (ga != gb) return ga > gb;
        return a < b;
    });

    const auto xy_dist = [&](int a, int b) {
        const Pose& pa = graph.vertices[a].pose;
        const Pose& pb = graph.vertices[b].pose;
        return std::sqrt((pa.x - pb.x) * (pa.x - pb.x) + (pa.y - pb.y) * (pa.y - pb.y));
    };

    std::vector<int> chosen;
    for (int v : order) {
        if (static_cast<int>(chosen.size()) >= params.max_frontier_nodes) break;
        if (!graph.vertices.empty() && xy_dist(0, v) > params.fc_range) continue;
        bool ok = true;
        for (int c : chosen)
            if (xy_dist(c, v) < params.min_frontier_spacing) {
                ok = false;
                break;
            }
        if (ok) chosen.push_back(v);
    }
    return chosen;
}

} // namespace occugen
