#pragma once

// Non-learned movement policies: occupancy-grid A* with pure-pursuit steering
// for the shortest-path baseline, plus the trivial passive and random ones.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <queue>
#include <vector>

#include "seeknet/common.hpp"
#include "seeknet/geometry.hpp"
#include "seeknet/policy.hpp"
#include "seeknet/world.hpp"

namespace seeknet {

// ---------------------------------------------------------------------------
// Occupancy grid: walls rasterized and inflated by the robot radius.
// ---------------------------------------------------------------------------

struct OccupancyGrid {
    double resolution = 0.1;  // meters per cell
    int width = 0, height = 0;
    Vec2 origin;              // world position of cell (0,0) corner
    std::vector<uint8_t> occupied;

    bool in_bounds(int cx, int cy) const { return cx >= 0 && cx < width && cy >= 0 && cy < height; }
    bool is_occupied(int cx, int cy) const {
        return occupied[static_cast<size_t>(cy) * width + cx] != 0;
    }
    void set_occupied(int cx, int cy) { occupied[static_cast<size_t>(cy) * width + cx] = 1; }

    std::pair<int, int> cell_of(const Vec2& p) const {
        return {static_cast<int>(std::floor((p.x - origin.x) / resolution)),
                static_cast<int>(std::floor((p.y - origin.y) / resolution))};
    }
    Vec2 center_of(int cx, int cy) const {
        return {origin.x + (cx + 0.5) * resolution, origin.y + (cy + 0.5) * resolution};
    }
};

inline OccupancyGrid build_occupancy_grid(const Rect& bounds, const std::vector<Segment>& walls,
                                          double inflation, double resolution = 0.1) {
    if (resolution <= 0.0) throw DomainError("occupancy grid: resolution must be positive");
    OccupancyGrid g;
    g.resolution = resolution;
    g.origin = {bounds.xmin, bounds.ymin};
    g.width = std::max(1, static_cast<int>(std::ceil(bounds.width() / resolution)));
    g.height = std::max(1, static_cast<int>(std::ceil(bounds.height() / resolution)));
    g.occupied.assign(static_cast<size_t>(g.width) * g.height, 0);
    for (int cy = 0; cy < g.height; ++cy) {
        for (int cx = 0; cx < g.width; ++cx) {
            const Vec2 c = g.center_of(cx, cy);
            for (const auto& s : walls) {
                if (point_segment_distance(c, s) <= inflation + 0.5 * resolution) {
                    g.set_occupied(cx, cy);
                    break;
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// A* over the 8-connected grid, Euclidean heuristic, deterministic
// tie-breaking. Costs are in cell units (1 and sqrt(2)).
// ---------------------------------------------------------------------------

struct PlanResult {
    bool reached = false;
    double cost = std::numeric_limits<double>::infinity();  // cell units
    std::vector<Vec2> path;                                 // world waypoints, start first
};

inline PlanResult astar_plan(const OccupancyGrid& g, const Vec2& start, const Vec2& goal) {
    PlanResult res;
    auto [sx, sy] = g.cell_of(start);
    auto [gx, gy] = g.cell_of(goal);
    if (!g.in_bounds(sx, sy)) throw PlanningError("astar: start outside grid");
    if (g.is_occupied(sx, sy)) throw PlanningError("astar: start cell occupied");
    if (!g.in_bounds(gx, gy)) return res;

    // Snap an occupied goal cell to the nearest free cell within a small disc.
    if (g.is_occupied(gx, gy)) {
        int best_x = -1, best_y = -1;
        double best_d = std::numeric_limits<double>::infinity();
        const int radius = 12;
        for (int dy = -radius; dy <= radius; ++dy) {
            for (int dx = -radius; dx <= radius; ++dx) {
                const int cx = gx + dx, cy = gy + dy;
                if (!g.in_bounds(cx, cy) || g.is_occupied(cx, cy)) continue;
                const double d = std::hypot(static_cast<double>(dx), static_cast<double>(dy));
                if (d < best_d) {
                    best_d = d;
                    best_x = cx;
                    best_y = cy;
                }
            }
        }
        if (best_x < 0) return res;
        gx = best_x;
        gy = best_y;
    }

    const double kSqrt2 = std::sqrt(2.0);
    const int n = g.width * g.height;
    std::vector<double> dist(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<int> parent(static_cast<size_t>(n), -1);
    std::vector<char> closed(static_cast<size_t>(n), 0);
    const auto idx = [&](int x, int y) { return y * g.width + x; };
    const auto heur = [&](int x, int y) {
        return std::hypot(static_cast<double>(x - gx), static_cast<double>(y - gy));
    };

    struct Node {
        double f;
        double gcost;
        int id;
        bool operator>(const Node& o) const {
            if (f != o.f) return f > o.f;
            if (gcost != o.gcost) return gcost > o.gcost;
            return id > o.id;
        }
    };
    std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
    dist[static_cast<size_t>(idx(sx, sy))] = 0.0;
    open.push({heur(sx, sy), 0.0, idx(sx, sy)});

    const int dxs[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    const int dys[8] = {0, 0, 1, -1, 1, -1, 1, -1};
    while (!open.empty()) {
        const Node cur = open.top();
        open.pop();
        if (closed[static_cast<size_t>(cur.id)]) continue;
        closed[static_cast<size_t>(cur.id)] = 1;
        const int cx = cur.id % g.width, cy = cur.id / g.width;
        if (cx == gx && cy == gy) break;
        for (int k = 0; k < 8; ++k) {
            const int nx = cx + dxs[k], ny = cy + dys[k];
            if (!g.in_bounds(nx, ny) || g.is_occupied(nx, ny)) continue;
            // No corner cutting on diagonals.
            if (k >= 4 && (g.is_occupied(cx + dxs[k], cy) || g.is_occupied(cx, cy + dys[k])))
                continue;
            const double step = k < 4 ? 1.0 : kSqrt2;
            const double nd = dist[static_cast<size_t>(cur.id)] + step;
            const int ni = idx(nx, ny);
            if (nd < dist[static_cast<size_t>(ni)]) {
                dist[static_cast<size_t>(ni)] = nd;
                parent[static_cast<size_t>(ni)] = cur.id;
                open.push({nd + heur(nx, ny), nd, ni});
            }
        }
    }

    const int goal_id = idx(gx, gy);
    if (!std::isfinite(dist[static_cast<size_t>(goal_id)])) return res;
    res.reached = true;
    res.cost = dist[static_cast<size_t>(goal_id)];
    std::vector<Vec2> rev;
    for (int id = goal_id; id >= 0; id = parent[static_cast<size_t>(id)])
        rev.push_back(g.center_of(id % g.width, id / g.width));
    res.path.assign(rev.rbegin(), rev.rend());
    return res;
}

// ---------------------------------------------------------------------------
// Pure pursuit along a planned path.
// ---------------------------------------------------------------------------

struct PurePursuitConfig {
    double lookahead = 0.5;       // meters along the path
    double heading_gain = 2.0;    // w = clamp(gain * heading error)
    double standoff = 1.0;        // stop translating this close to the target
};

inline Velocity pure_pursuit(const std::vector<Vec2>& path, const Pose2D& robot,
                             const PurePursuitConfig& cfg) {
    if (path.empty()) return {0.0, 0.0};
    // First path point at least lookahead away, else the last one.
    Vec2 target = path.back();
    for (const auto& p : path) {
        if (distance(robot.position(), p) >= cfg.lookahead) {
            target = p;
            break;
        }
    }
    const Vec2 rel = target - robot.position();
    const double heading_err = normalize_angle(std::atan2(rel.y, rel.x) - robot.theta);
    Velocity u;
    u.w = std::clamp(cfg.heading_gain * heading_err, -kYawRateMax, kYawRateMax);
    u.v = std::clamp(kVelMax * std::max(0.0, std::cos(heading_err)), kVelMin, kVelMax);
    return u;
}

// ---------------------------------------------------------------------------
// Baseline policies
// ---------------------------------------------------------------------------

inline std::optional<Vec2> nearest_free_cell(const OccupancyGrid& g, const Vec2& p,
                                             int search_radius = 8) {
    auto [px, py] = g.cell_of(p);
    double best_d = std::numeric_limits<double>::infinity();
    std::optional<Vec2> best;
    for (int dy = -search_radius; dy <= search_radius; ++dy) {
        for (int dx = -search_radius; dx <= search_radius; ++dx) {
            const int cx = px + dx, cy = py + dy;
            if (!g.in_bounds(cx, cy) || g.is_occupied(cx, cy)) continue;
            const Vec2 c = g.center_of(cx, cy);
            const double d = distance(c, p);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
    }
    return best;
}

inline Velocity passive_policy() { return {0.0, 0.0}; }

inline Velocity random_policy(const ActionSpace& actions, Rng& rng) {
    return actions.at(static_cast<int>(rng.uniform_index(static_cast<uint64_t>(actions.size()))));
}

// Plan to the pursued target's last estimated pose and follow with pure
// pursuit; hold a standoff once close; rotate in place when walled off.
inline Velocity shortest_path_policy(const OccupancyGrid& grid, const RobotState& robot,
                                     const Vec2& target, const PurePursuitConfig& cfg = {},
                                     std::vector<Vec2>* planned_path = nullptr) {
    const Vec2 rel = target - robot.pose.position();
    const double dist_to_target = rel.norm();
    const double heading_err = normalize_angle(std::atan2(rel.y, rel.x) - robot.pose.theta);
    if (dist_to_target <= cfg.standoff) {
        // Close enough: face the target.
        return {0.0, std::clamp(cfg.heading_gain * heading_err, -kYawRateMax, kYawRateMax)};
    }
    const PlanResult plan = astar_plan(grid, robot.pose.position(), target);
    if (planned_path) *planned_path = plan.path;
    if (!plan.reached) return {0.0, kYawRateMax};  // rotate-in-place fallback
    // Drop path points already behind the robot relative to the standoff.
    return pure_pursuit(plan.path, robot.pose, cfg);
}

inline void write_path_csv(const std::vector<Vec2>& path, const std::string& out_path) {
    std::ofstream out(out_path);
    if (!out) throw FormatError("write_path_csv: cannot open " + out_path);
    out << "x,y\n";
    for (const auto& p : path) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", p.x, p.y);
        out << buf;
    }
}

}  // namespace seeknet
